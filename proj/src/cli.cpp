#include "csll/cli.hpp"

#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "csll/logic.hpp"
#include "csll/parser.hpp"
#include "csll/runtime.hpp"
#include "csll/typecheck.hpp"
#include "json.hpp"

namespace csll {

namespace {

using nlohmann::json;

struct Usage : std::runtime_error {
    int code;
    Usage(const std::string& m, int c) : std::runtime_error(m), code(c) {}
};

Program load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Usage("cannot open " + path, ExitTypeError);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_program(ss.str(), path);
}

std::string error_kind(TypeErrorKind k) {
    switch (k) {
        case TypeErrorKind::Mismatch: return "mismatch";
        case TypeErrorKind::Linearity: return "linearity";
        case TypeErrorKind::Arity: return "arity";
        case TypeErrorKind::ZeroPosition: return "zero-position";
        case TypeErrorKind::Undefined: return "undefined";
    }
    return "?";
}

std::string node_text(const Derivation& d, int id) {
    const DerivNode& n = d.nodes[id];
    std::string s = "n" + std::to_string(id) + " " + n.rule;
    if (n.rule == "call") s += " " + n.def_name;
    else if (n.subject) s += " " + n.subject->name;
    return s;
}

std::string witness_text(const Derivation& d, const std::vector<int>& w) {
    std::string s;
    for (int id : w) s += (s.empty() ? "" : " -> ") + node_text(d, id);
    return s;
}

std::map<Chan, std::string> main_names(const Program& prog) {
    std::map<Chan, std::string> names;
    if (prog.main)
        for (auto& [c, t] : prog.main->params) names[c] = c.name;
    return names;
}

struct EntryCheck {
    EntryReport report;
    std::optional<ProofGraph> proof;
    ProofValidity proof_validity;
};

EntryCheck check_one(const Definition& d, bool is_main, const Program& prog, int bound) {
    EntryCheck ec;
    ec.report = check_entry(d, is_main, prog, bound);
    if (!ec.report.well_typed) return ec;
    try {
        ec.proof = encode_derivation(*ec.report.derivation);
        ec.proof_validity = proof_validity(*ec.proof, bound);
    } catch (const CoreError& e) {
        ec.proof_validity.verdict = Verdict::Invalid;
        ec.proof_validity.reason = e.what();
    }
    return ec;
}

const Definition& find_entry(const Program& prog, const std::string& name) {
    if (name == "main") {
        if (!prog.main) throw Usage("no main in program", ExitTypeError);
        return *prog.main;
    }
    const Definition* d = prog.find(name);
    if (!d) throw Usage("no definition named " + name, ExitTypeError);
    return *d;
}

}  // namespace

int cmd_check(const CliConfig& cfg, std::ostream& out, std::ostream&) {
    int worst = ExitOk;
    json files = json::array();
    for (auto& path : cfg.inputs) {
        Program prog = load(path);
        std::vector<EntryCheck> checks;
        for (auto& [name, d] : prog.defs) checks.push_back(check_one(d, false, prog, cfg.validity_bound));
        if (prog.main) checks.push_back(check_one(*prog.main, true, prog, cfg.validity_bound));

        int code = ExitOk;
        json entries = json::array();
        if (cfg.format == "text") out << path << "\n";
        for (auto& ec : checks) {
            const EntryReport& r = ec.report;
            std::string label = r.is_main ? "main" : "def " + r.name;
            json j = {{"name", r.name}, {"well_typed", r.well_typed}};
            if (!r.well_typed) {
                code = std::max(code, static_cast<int>(ExitTypeError));
                j["error"] = {{"message", r.error},
                              {"kind", r.error_kind ? error_kind(*r.error_kind) : "syntax"},
                              {"span", format_span(r.error_span)}};
                if (cfg.format == "text") out << "  " << label << ": type error at " << format_span(r.error_span) << ": " << r.error << "\n";
                entries.push_back(j);
                continue;
            }
            Verdict v = r.validity.verdict;
            Verdict pv = ec.proof_validity.verdict;
            bool agree = v == pv;
            if (v == Verdict::Invalid || pv == Verdict::Invalid)
                code = code == ExitTypeError ? code : std::max(code, static_cast<int>(ExitInvalid));
            else if (v == Verdict::Inconclusive || pv == Verdict::Inconclusive)
                code = code == ExitOk ? static_cast<int>(ExitInconclusive) : code;
            j["validity"] = {{"verdict", to_string(v)},
                             {"witness", r.validity.witness},
                             {"reason", r.validity.reason},
                             {"rounds", r.validity.rounds}};
            j["proof_validity"] = {{"verdict", to_string(pv)}, {"reason", ec.proof_validity.reason}};
            j["agree"] = agree;
            if (cfg.format == "text") {
                out << "  " << label << ": well typed, " << to_string(v);
                out << (agree ? " (proof agrees)" : " (proof says " + to_string(pv) + ")") << "\n";
                if (v == Verdict::Invalid)
                    out << "    witness: " << witness_text(*r.derivation, r.validity.witness) << "\n"
                        << "    " << r.validity.reason << "\n";
                if (v == Verdict::Inconclusive)
                    out << "    " << r.validity.reason << "; try a larger --validity-bound\n";
            }
            entries.push_back(j);
        }
        static const char* names[] = {"ok", "type error", "invalid", "inconclusive"};
        if (cfg.format == "text") out << "result: " << names[code] << "\n";
        files.push_back({{"file", path}, {"entries", entries}, {"exit", code}});
        if (code == ExitTypeError || worst == ExitTypeError) worst = ExitTypeError;
        else worst = std::max(worst, code);
    }
    if (cfg.format == "json") out << json{{"files", files}}.dump(2) << "\n";
    return worst;
}

int cmd_run(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    Program prog = load(cfg.inputs.at(0));
    if (!prog.main) throw Usage("no main in " + cfg.inputs[0], ExitTypeError);
    auto r = check_entry(*prog.main, true, prog, cfg.validity_bound);
    if (!r.well_typed) {
        err << "main is not well typed: " << format_span(r.error_span) << ": " << r.error << "\n";
        return ExitTypeError;
    }
    Scheduler s = cfg.scheduler == "random" ? Scheduler::Random : Scheduler::Det;
    Trace t = run(prog.main->body, prog, s, cfg.seed, cfg.max_steps);
    auto names = main_names(prog);
    if (cfg.format == "json") {
        json steps = json::array();
        for (auto& e : t.entries)
            steps.push_back({{"step", e.step},
                             {"rule", to_string(e.redex.kind)},
                             {"channel", e.redex.channel.name},
                             {"hash", format_trace_line(e).substr(format_trace_line(e).rfind(' ') + 1)}});
        out << json{{"steps", steps},
                    {"final", pretty(t.final_state, names)},
                    {"terminated", t.terminated},
                    {"truncated", t.truncated}}
                   .dump(2)
            << "\n";
    } else {
        for (auto& e : t.entries) out << format_trace_line(e) << "\n";
        if (t.truncated)
            out << "truncated after " << t.entries.size() << " steps\n";
        else
            out << "terminal: " << pretty(t.final_state, names) << "\n";
    }
    return t.truncated ? ExitBudget : ExitOk;
}

int cmd_explore(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    Program prog = load(cfg.inputs.at(0));
    if (!prog.main) throw Usage("no main in " + cfg.inputs[0], ExitTypeError);
    FairReport rep = check_fair_termination(prog.main->body, prog, cfg.max_states);
    const ReductionGraph& g = rep.graph;
    if (g.partial) err << "warning: exploration stopped at the state bound; verdicts are qualified\n";
    if (cfg.format == "dot") {
        out << graph_to_dot(g);
    } else if (cfg.format == "json") {
        auto j = json::parse(graph_to_json(g));
        j["verdict"] = to_string(rep.verdict);
        out << j.dump(2) << "\n";
    } else {
        auto names = main_names(prog);
        out << "states: " << g.states.size() << "\n";
        out << "edges: " << g.edge_count() << "\n";
        out << "normal forms: " << g.normal_form_count() << "\n";
        for (size_t i = 0; i < g.states.size(); ++i)
            if (g.normal_form[i]) out << "  " << pretty(g.states[i], names) << "\n";
        out << "partial: " << (g.partial ? "yes" : "no") << "\n";
        out << "verdict: " << to_string(rep.verdict) << "\n";
        if (rep.witness >= 0)
            out << "  state not weakly terminating: " << pretty(g.states[rep.witness], names) << "\n";
    }
    return g.partial ? ExitBudget : ExitOk;
}

int cmd_export_proof(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.inputs.size() < 2) throw Usage("export-proof needs a file and a definition name", ExitTypeError);
    Program prog = load(cfg.inputs[0]);
    const Definition& d = find_entry(prog, cfg.inputs[1]);
    EntryCheck ec = check_one(d, cfg.inputs[1] == "main", prog, cfg.validity_bound);
    if (!ec.report.well_typed) {
        err << "not well typed: " << ec.report.error << "\n";
        return ExitTypeError;
    }
    int code = ExitOk;
    if (ec.report.validity.verdict == Verdict::Invalid) code = ExitInvalid;
    else if (ec.report.validity.verdict == Verdict::Inconclusive) code = ExitInconclusive;
    if (code != ExitOk && !cfg.force) {
        err << "derivation is " << to_string(ec.report.validity.verdict) << "; use --force to export anyway\n";
        return code;
    }
    if (!ec.proof) {
        err << "no proof: " << ec.proof_validity.reason << "\n";
        return ExitInvalid;
    }
    if (cfg.format == "dot")
        out << proof_to_dot(*ec.proof, &ec.proof_validity);
    else
        out << proof_to_json(*ec.proof, &ec.proof_validity) << "\n";
    return code;
}

int cmd_gen_link(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    Type t = parse_type(cfg.inputs.at(0));
    Program p = gen_link(t);
    // reparse so the output is exactly what a user would feed back in
    Program q = parse_program(pretty(p), "<gen-link>");
    ProgramReport rep = check_program(q, cfg.validity_bound);
    out << pretty(p);
    int code = ExitOk;
    for (auto& e : rep.entries) {
        if (!e.well_typed) {
            err << e.name << ": " << e.error << "\n";
            code = ExitTypeError;
        } else if (e.validity.verdict != Verdict::Valid && code == ExitOk) {
            err << e.name << ": " << to_string(e.validity.verdict) << "\n";
            code = e.validity.verdict == Verdict::Invalid ? ExitInvalid : ExitInconclusive;
        }
    }
    out << "-- checked " << rep.entries.size() << " definitions: "
        << (code == ExitOk ? "all well typed and valid" : "FAILED") << "\n";
    return code;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"csll: check, run and explore CSLL-infinity programs"};
    app.require_subcommand(1);
    CliConfig cfg;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--validity-bound", cfg.validity_bound, "closure rounds for the validity checks")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--format", cfg.format, "output format")->check(CLI::IsMember({"text", "json", "dot"}));
    };
    auto* check = app.add_subcommand("check", "typecheck and validate every definition");
    check->add_option("files", cfg.inputs, "program files")->required();
    common(check);

    auto* runc = app.add_subcommand("run", "execute main");
    runc->add_option("file", cfg.inputs, "program file")->required()->expected(1);
    runc->add_option("--scheduler", cfg.scheduler, "det or random")->check(CLI::IsMember({"det", "random"}));
    runc->add_option("--seed", cfg.seed, "seed for the random scheduler");
    runc->add_option("--max-steps", cfg.max_steps, "step budget")->check(CLI::NonNegativeNumber);
    common(runc);

    auto* expl = app.add_subcommand("explore", "explore the reduction graph of main");
    expl->add_option("file", cfg.inputs, "program file")->required()->expected(1);
    expl->add_option("--max-states", cfg.max_states, "state bound")->check(CLI::PositiveNumber);
    common(expl);

    auto* exp = app.add_subcommand("export-proof", "export the encoded proof of a definition");
    exp->add_option("args", cfg.inputs, "file and definition name (or main)")->required()->expected(2);
    exp->add_flag("--force", cfg.force, "export even if the derivation is not valid");
    common(exp);

    auto* gl = app.add_subcommand("gen-link", "generate the forwarder family for a type");
    gl->add_option("type", cfg.inputs, "session type")->required()->expected(1);
    common(gl);

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return ExitTypeError;
    }

    try {
        if (check->parsed()) return cmd_check(cfg, out, err);
        if (runc->parsed()) return cmd_run(cfg, out, err);
        if (expl->parsed()) return cmd_explore(cfg, out, err);
        if (exp->parsed()) return cmd_export_proof(cfg, out, err);
        if (gl->parsed()) return cmd_gen_link(cfg, out, err);
    } catch (const ParseError& e) {
        err << e.what() << "\n";
        return ExitTypeError;
    } catch (const Usage& e) {
        err << e.what() << "\n";
        return e.code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return ExitTypeError;
    }
    return ExitOk;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace csll
