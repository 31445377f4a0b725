#include <chrono>
#include <iostream>
#include <sstream>

#include "corpus.hpp"
#include "csll/logic.hpp"
#include "csll/parser.hpp"
#include "csll/runtime.hpp"
#include "csll/typecheck.hpp"
#include "generators.hpp"

using namespace csll;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    std::string first_failure;

    void require(bool cond, const std::string& what) {
        if (!cond && pass) first_failure = what;
        pass = pass && cond;
    }
};

int failures = 0;

void report(int n, const std::string& name, Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << n << " " << name << ": " << o.detail.str();
    if (!o.pass) std::cout << " [first failure: " << o.first_failure << "]";
    std::cout << std::endl;
    failures += !o.pass;
}

bool is_close_of(const Proc& p, const Chan& x) {
    const Close* c = as<Close>(p);
    return c && c->x == x;
}

// close x, possibly after selections on x
bool ends_in_close(Proc p, const Chan& x) {
    while (const Select* s = as<Select>(p)) {
        if (s->x != x) return false;
        p = s->p;
    }
    return is_close_of(p, x);
}

bool link_accepted(const Type& t) {
    try {
        ProgramReport rep = check_program(gen_link(t));
        return rep.all_well_typed() && rep.all_valid();
    } catch (const std::exception&) {
        return false;
    }
}

void corpus_verdicts() {
    Outcome o;
    auto t0 = Clock::now();
    auto verdict = [](const std::string& f) {
        ProgramReport r = check_program(corpus::load(f));
        return r.all_well_typed() && r.all_valid();
    };
    o.require(verdict("lock.csll"), "lock.csll accepted");
    o.require(!verdict("omega.csll"), "omega.csll rejected");
    o.require(!verdict("omega_server.csll"), "omega_server.csll rejected");
    o.require(verdict("cas.csll"), "cas.csll accepted");

    const double budget = 5.0;
    std::vector<Type> below = gen::all_types_up_to(3);
    std::uint64_t checked = 0;
    for (const Type& t : below) {
        o.require(link_accepted(t), "gen-link " + type_key(t));
        ++checked;
    }
    double shallow = seconds_since(t0);
    bool over = false;
    std::uint64_t deep = gen::for_each_type_of_depth(4, below, [&](const Type& t) {
        if (seconds_since(t0) > budget) {
            over = true;
            return false;
        }
        o.require(link_accepted(t), "gen-link " + type_key(t));
        return true;
    });
    double total = seconds_since(t0);
    o.detail << "corpus verdicts exact; gen-link accepted for " << checked << " types of depth <= 3 in " << shallow
             << " s";
    if (over) {
        o.detail << "; depth 4 adds about 2.16e9 types, " << deep << " checked before the " << budget
                 << " s budget ran out";
        o.require(false, "depth-4 enumeration incomplete within budget");
    } else {
        o.detail << "; " << deep << " types of depth 4";
    }
    o.require(over || total < budget, "runtime under 5 s");
    o.detail << "; " << total << " s total";
    report(1, "corpus verdicts and gen-link", o);
}

void encoding_fidelity() {
    Outcome o;
    Formula one = f_const(FKind::One), bot = f_const(FKind::Bot);
    Formula cli = f_fix(FKind::Mu, "X", f_bin(FKind::Plus, one, f_bin(FKind::Tensor, one, f_var("X"))));
    Formula srv = f_fix(FKind::Nu, "X", f_bin(FKind::With, bot, f_bin(FKind::Par, bot, f_var("X"))));
    o.require(formula_equal(encode_type(t_client(t_one())), cli), "client of 1");
    o.require(formula_equal(encode_type(t_server(t_bot())), srv), "server of bot");
    gen::Rng r(2);
    int n = 0;
    for (; n < 1000; ++n) {
        Type t = gen::random_type(r, 1 + n % 6);
        o.require(formula_equal(encode_type(dual_type(t)), dual_formula(encode_type(t))), "commutation " + type_key(t));
    }
    o.detail << "both encodings exact; duality commutes on " << n << " random types";
    report(2, "encoding fidelity", o);
}

void validity_agreement() {
    Outcome o;
    int entries = 0, disagree = 0;
    for (const auto& f : corpus::files()) {
        for (const auto& e : check_program(corpus::load(f)).entries) {
            ++entries;
            ProofValidity v = proof_validity(encode_derivation(*e.derivation));
            if (v.verdict != e.validity.verdict) ++disagree;
            o.require(v.verdict == e.validity.verdict, f + " " + e.name);
        }
    }
    o.detail << entries << " derivations, " << disagree << " disagreements";
    report(3, "validity agreement", o);
}

void subject_reduction() {
    Outcome o;
    int edges = 0, fails = 0;
    for (const auto& f : corpus::files()) {
        Program prog = corpus::load(f);
        TypeContext g = param_context(*prog.main);
        ReductionGraph graph = explore(prog.main->body, prog);
        for (size_t s = 0; s < graph.states.size(); ++s)
            for (const auto& e : graph.edges[s]) {
                ++edges;
                try {
                    check(graph.states[e.target], g, prog);
                } catch (const TypeError& err) {
                    ++fails;
                    o.require(false, f + ": " + err.what());
                }
            }
    }
    o.detail << edges << " edges, " << fails << " failures";
    report(4, "subject reduction", o);
}

void deadlock_freedom() {
    Outcome o;
    auto t0 = Clock::now();
    int programs = 0, states = 0, fails = 0;
    for (std::uint64_t seed = 0; programs < 1000; ++seed) {
        gen::Rng r(seed);
        auto g = gen::random_program(r, 14);
        ProgramReport rep = check_program(g.program);
        o.require(rep.all_well_typed(), "generator produced an ill-typed program");
        ++programs;
        ReductionGraph graph = explore(g.program.main->body, g.program, 2000);
        for (const Proc& s : graph.states) {
            ++states;
            if (is_close_of(unfold(s, g.program), g.x)) continue;
            if (step_det(s, g.program).empty()) {
                ++fails;
                o.require(false, pretty(s));
            }
        }
    }
    double t = seconds_since(t0);
    o.require(t < 60.0, "runtime under 60 s");
    o.detail << programs << " programs, " << states << " states, " << fails << " failures, " << t << " s";
    report(5, "deadlock freedom", o);
}

void termination_behaviour() {
    Outcome o;
    for (std::string f : {"lock.csll", "cas.csll"}) {
        Program prog = corpus::load(f);
        Trace t = run(prog.main->body, prog, Scheduler::Det, 0, 1000);
        o.require(t.terminated && ends_in_close(t.final_state, prog.main->params[0].first),
                  f + " normalizes under det");
        o.detail << f << " normal after " << t.entries.size() << " steps; ";
    }
    Program cas = corpus::load("cas.csll");
    ReductionGraph g = explore(cas.main->body, cas);
    Chan z = cas.main->params[0].first;
    std::set<std::string> nf;
    for (size_t i = 0; i < g.states.size(); ++i)
        if (g.normal_form[i]) nf.insert(pretty(g.states[i], {{z, "z"}}));
    o.require(nf == std::set<std::string>{"z.in1; close z", "z.in2; close z"}, "cas normal forms");
    o.detail << "cas normal forms " << nf.size() << "; ";
    auto fair = [](const std::string& f) {
        Program p = corpus::load(f);
        return check_fair_termination(p.main->body, p).verdict;
    };
    o.require(fair("lock.csll") == FairVerdict::FairlyTerminating, "lock fairly terminating");
    o.require(fair("cas.csll") == FairVerdict::FairlyTerminating, "cas fairly terminating");
    o.require(fair("omega.csll") == FairVerdict::NotFairlyTerminating, "omega not fairly terminating");
    o.detail << "fair termination lock/cas yes, omega no";
    report(6, "termination behaviour", o);
}

void correspondence_law() {
    Outcome o;
    std::map<std::string, int> by_kind;
    int edges = 0, mismatches = 0;
    for (const auto& f : corpus::files()) {
        Program prog = corpus::load(f);
        TypeContext g = param_context(*prog.main);
        ReductionGraph graph = explore(prog.main->body, prog);
        for (const auto& s : graph.states)
            for (const auto& c : simulate_all(s, g, prog)) {
                ++edges;
                by_kind[std::to_string(c.steps)]++;
                if (!c.ok || c.steps != c.expected) {
                    ++mismatches;
                    o.require(false, f + ": " + c.message);
                }
            }
    }
    o.detail << edges << " det edges (";
    for (const auto& [k, v] : by_kind) o.detail << v << " x " << k << " steps ";
    o.detail << "), " << mismatches << " mismatches";
    o.require(edges > 0, "some det edges");
    report(7, "correspondence law", o);
}

void micro_examples() {
    Outcome o;
    Formula one = f_const(FKind::One);
    Formula mu = f_fix(FKind::Mu, "X", f_bin(FKind::Plus, f_var("X"), one));
    o.require(!is_nu_cycle({mu, unfold_fixpoint(mu)}), "mu X.(X + 1) thread is not a nu-thread");
    Formula phi = f_fix(FKind::Nu, "X", f_fix(FKind::Mu, "Y", f_bin(FKind::Plus, f_var("X"), f_var("Y"))));
    Formula psi = f_fix(FKind::Mu, "Y", f_bin(FKind::Plus, phi, f_var("Y")));
    Formula sum = f_bin(FKind::Plus, phi, psi);
    o.require(is_nu_cycle({phi, psi, sum}), "t1 is a nu-thread");
    o.require(!is_nu_cycle({psi, sum}), "t2 is not a nu-thread");
    o.require(subformula_leq(phi, psi), "phi <= psi");
    o.require(!subformula_leq(psi, phi), "psi not <= phi");
    o.detail << "three threads and two ordering facts";
    report(8, "thread examples", o);
}

void threads_exceed_channels() {
    Outcome o;
    int processes = 0, fails = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        gen::Rng r(seed);
        auto g = gen::random_program(r, 14);
        ReductionGraph graph = explore(g.program.main->body, g.program, 2000);
        for (const Proc& s : graph.states) {
            Proc u = unfold(s, g.program);
            ++processes;
            if (count_threads(u) <= count_channels(u)) {
                ++fails;
                o.require(false, pretty(u));
            }
        }
    }
    o.detail << processes << " unfolded processes, " << fails << " failures";
    report(9, "threads exceed channels", o);
}

}  // namespace

int main() {
    corpus_verdicts();
    encoding_fidelity();
    validity_agreement();
    subject_reduction();
    deadlock_freedom();
    termination_behaviour();
    correspondence_law();
    micro_examples();
    threads_exceed_channels();
    return failures == 0 ? 0 : 1;
}
