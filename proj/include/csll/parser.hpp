#pragma once

#include <string>

#include "csll/core.hpp"

namespace csll {

struct ParseError : std::runtime_error {
    SourceSpan span;
    ParseError(const std::string& msg, SourceSpan s);
};

Program parse_program(const std::string& text, const std::string& file = "<input>");
Type parse_type(const std::string& text);
// A process whose free names are resolved against `scope` (by name); unknown
// names become fresh free channels.
Proc parse_process(const std::string& text, std::map<std::string, Chan>& scope);

std::string pretty(const Type& t);
std::string pretty(const Proc& p);
// Uses `names` for free channels that are already named.
std::string pretty(const Proc& p, const std::map<Chan, std::string>& names);
std::string pretty(const Definition& d, bool is_main = false);
std::string pretty(const Program& prog);

std::string format_span(const SourceSpan& s);

}  // namespace csll
