#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csll/core.hpp"

namespace csll {

using TypeContext = std::map<Chan, Type>;

struct Judgment {
    Proc process;
    TypeContext context;
};

struct DerivEdge {
    int target = -1;
    bool back = false;
    std::map<Chan, Chan> corr;  // back-edges only: source channel -> target channel
};

struct DerivNode {
    Judgment judgment;
    std::string rule;
    std::optional<Chan> subject;
    std::string def_name;  // call nodes
    std::vector<DerivEdge> premises;
};

struct Derivation {
    std::vector<DerivNode> nodes;
    int root = 0;
};

enum class TypeErrorKind { Mismatch, Linearity, Arity, ZeroPosition, Undefined };

struct TypeError : std::runtime_error {
    TypeErrorKind kind;
    SourceSpan span;
    std::string rule;
    TypeError(TypeErrorKind k, const std::string& msg, SourceSpan s, std::string r = "");
};

std::string describe(const TypeContext& g);

// Assigns each entry of `g` to the side whose free names contain it. A channel
// used by neither side goes to a side that may leave it unused (fail x).
std::pair<TypeContext, TypeContext> split_context(const TypeContext& g, const std::set<Chan>& fn_left,
                                                  const std::set<Chan>& fn_right, bool absorb_left = false,
                                                  bool absorb_right = false);

// Whether a derivation for `p` can carry channels that `p` never mentions.
bool can_absorb(const Proc& p);

Derivation check(const Proc& p, const TypeContext& g, const Program& prog);

enum class Verdict { Valid, Invalid, Inconclusive };
std::string to_string(Verdict v);

struct ValidityReport {
    Verdict verdict = Verdict::Valid;
    std::vector<int> witness;  // node ids of an offending cycle
    std::string reason;
    int rounds = 0;            // closure rounds used
};

ValidityReport validity_check(const Derivation& d, int bound = 3);

struct EntryReport {
    std::string name;
    bool is_main = false;
    bool well_typed = false;
    std::string error;
    std::optional<TypeErrorKind> error_kind;
    SourceSpan error_span;
    std::optional<Derivation> derivation;
    ValidityReport validity;
};

struct ProgramReport {
    std::vector<EntryReport> entries;
    bool all_well_typed() const;
    bool all_valid() const;
    bool any_inconclusive() const;
};

TypeContext param_context(const Definition& d);
// Derivation of `Call d(params)` at the annotated context.
Derivation check_definition(const Definition& d, const Program& prog);
EntryReport check_entry(const Definition& d, bool is_main, const Program& prog, int bound = 3);
ProgramReport check_program(const Program& prog, int bound = 3);

std::string link_name(const Type& t);
// The Link family needed for `t`.
Program gen_link(const Type& t);

}  // namespace csll
