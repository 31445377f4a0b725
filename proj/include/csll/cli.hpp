#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace csll {

enum ExitCode {
    ExitOk = 0,
    ExitTypeError = 1,
    ExitInvalid = 2,
    ExitInconclusive = 3,
    ExitBudget = 4,
};

struct CliConfig {
    std::string command;
    std::vector<std::string> inputs;
    std::string scheduler = "det";
    unsigned long long seed = 0;
    int max_steps = 1000;
    int max_states = 100000;
    int validity_bound = 3;
    std::string format = "text";
    bool force = false;
};

// Runs `csll` with the given arguments (argv[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

int cmd_check(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_run(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_explore(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_export_proof(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_gen_link(const CliConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace csll
