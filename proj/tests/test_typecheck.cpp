#include <gtest/gtest.h>

#include "corpus.hpp"
#include "csll/parser.hpp"
#include "csll/runtime.hpp"
#include "csll/typecheck.hpp"
#include "generators.hpp"

using namespace csll;

namespace {

int count_rule(const Derivation& d, const std::string& rule) {
    int n = 0;
    for (const auto& node : d.nodes) n += node.rule == rule;
    return n;
}

int count_back_edges(const Derivation& d) {
    int n = 0;
    for (const auto& node : d.nodes)
        for (const auto& e : node.premises) n += e.back;
    return n;
}

TypeErrorKind error_kind_of(const Proc& p, const TypeContext& g, const Program& prog) {
    try {
        check(p, g, prog);
    } catch (const TypeError& e) {
        return e.kind;
    }
    ADD_FAILURE() << "expected a type error for " << pretty(p);
    return TypeErrorKind::Undefined;
}

}  // namespace

TEST(SplitContext, Examples) {
    Chan u = fresh_channel("u"), v = fresh_channel("v");
    TypeContext g{{u, t_one()}, {v, t_one()}};
    auto [l, r] = split_context(g, {u}, {v});
    EXPECT_EQ(l.size(), 1u);
    EXPECT_EQ(r.size(), 1u);
    EXPECT_TRUE(l.count(u));
    EXPECT_TRUE(r.count(v));

    TypeContext one{{u, t_one()}};
    EXPECT_THROW(split_context(one, {u}, {u}), TypeError);
    EXPECT_THROW(split_context(one, {}, {}), TypeError);
    EXPECT_THROW(split_context(one, {v}, {}), TypeError);
}

TEST(SplitContext, UnusedChannelsGoToAnAbsorbingSide) {
    Chan u = fresh_channel("u"), v = fresh_channel("v");
    TypeContext g{{u, t_one()}, {v, t_bot()}};
    auto [l, r] = split_context(g, {u}, {}, false, true);
    EXPECT_TRUE(l.count(u));
    EXPECT_TRUE(r.count(v));
}

TEST(SplitContext, PartitionsRandomContexts) {
    gen::Rng rng(31);
    for (int i = 0; i < 500; ++i) {
        TypeContext g;
        std::set<Chan> fl, fr;
        int n = rng.uniform(0, 6);
        for (int k = 0; k < n; ++k) {
            Chan c = fresh_channel("c");
            g[c] = gen::random_type(rng, 3);
            (rng.chance(0.5) ? fl : fr).insert(c);
        }
        auto [l, r] = split_context(g, fl, fr);
        ASSERT_EQ(l.size() + r.size(), g.size());
        for (const auto& [c, t] : l) ASSERT_TRUE(fl.count(c) && !r.count(c));
        for (const auto& [c, t] : r) ASSERT_TRUE(fr.count(c));
    }
}

TEST(Check, CloseIsASingleOneNode) {
    Chan x = fresh_channel("x");
    Derivation d = check(p_close(x), {{x, t_one()}}, Program{});
    ASSERT_EQ(d.nodes.size(), 1u);
    EXPECT_EQ(d.nodes[0].rule, "one");
    EXPECT_TRUE(d.nodes[0].premises.empty());
}

TEST(Check, LockHasOneBackEdge) {
    Program prog = corpus::load("lock.csll");
    Chan x = fresh_channel("x"), z = fresh_channel("z");
    Derivation d = check(p_call("Lock", {x, z}), {{x, t_server(t_bot())}, {z, t_one()}}, prog);
    EXPECT_EQ(count_back_edges(d), 1);
    EXPECT_EQ(count_rule(d, "server"), 1);
    for (const auto& node : d.nodes)
        for (const auto& e : node.premises)
            if (e.back) {
                EXPECT_EQ(d.nodes[e.target].rule, "call");
                EXPECT_EQ(d.nodes[e.target].def_name, "Lock");
                EXPECT_EQ(node.def_name, "Lock");
            }
}

TEST(Check, Errors) {
    Chan x = fresh_channel("x"), z = fresh_channel("z"), y = fresh_channel("y");
    Program none;
    EXPECT_EQ(error_kind_of(p_wait(x, p_close(z)), {{x, t_one()}, {z, t_one()}}, none), TypeErrorKind::Mismatch);
    EXPECT_EQ(error_kind_of(p_close(x), {{x, t_one()}, {z, t_one()}}, none), TypeErrorKind::Linearity);
    EXPECT_EQ(error_kind_of(p_close(x), {{x, t_bot()}}, none), TypeErrorKind::Mismatch);
    EXPECT_EQ(error_kind_of(p_fail(x), {{x, t_zero()}}, none), TypeErrorKind::ZeroPosition);
    EXPECT_EQ(error_kind_of(p_fork(x, y, p_close(x), p_close(y)), {{x, t_tensor(t_one(), t_one())}}, none),
              TypeErrorKind::Linearity);
    EXPECT_EQ(error_kind_of(p_call("Nope", {x}), {{x, t_one()}}, none), TypeErrorKind::Undefined);
    Program a = parse_program("def A(x: 1) = close x");
    EXPECT_EQ(error_kind_of(p_call("A", {x}), {{x, t_bot()}}, a), TypeErrorKind::Mismatch);
}

TEST(Check, AdditiveRulesShareTheContext) {
    Program prog = parse_program("def A(x: bot & bot, z: 1) = case x { in1: wait x; close z ; in2: wait x; close z }");
    EXPECT_TRUE(check_program(prog).all_well_typed());
}

TEST(Check, TopAbsorbsUnusedChannels) {
    Program prog = parse_program("def A(x: top, z: 1, w: bot) = fail x");
    EXPECT_TRUE(check_program(prog).all_well_typed());
}

TEST(Validity, Lock) {
    Program prog = corpus::load("lock.csll");
    ValidityReport v = validity_check(check_definition(*prog.find("Lock"), prog));
    EXPECT_EQ(v.verdict, Verdict::Valid) << v.reason;
}

TEST(Validity, OmegaWitnessHasNoServer) {
    Program prog = corpus::load("omega.csll");
    Derivation d = check_definition(*prog.find("Omega"), prog);
    ValidityReport v = validity_check(d);
    ASSERT_EQ(v.verdict, Verdict::Invalid);
    ASSERT_FALSE(v.witness.empty());
    for (int n : v.witness) EXPECT_NE(d.nodes[n].rule, "server");
}

TEST(Validity, OmegaServerIsInvalidDespiteItsServer) {
    Program prog = corpus::load("omega_server.csll");
    Derivation d = check_definition(*prog.find("OmegaServer"), prog);
    ValidityReport v = validity_check(d);
    ASSERT_EQ(v.verdict, Verdict::Invalid);
    bool server = false, cut = false;
    for (int n : v.witness) {
        server |= d.nodes[n].rule == "server";
        cut |= d.nodes[n].rule == "cut";
    }
    EXPECT_TRUE(server);
    EXPECT_TRUE(cut);
}

TEST(CheckProgram, Corpus) {
    auto lock = check_program(corpus::load("lock.csll"));
    EXPECT_TRUE(lock.all_well_typed());
    EXPECT_TRUE(lock.all_valid());
    auto cas = check_program(corpus::load("cas.csll"));
    EXPECT_TRUE(cas.all_well_typed());
    EXPECT_TRUE(cas.all_valid());
    auto omega = check_program(corpus::load("omega.csll"));
    EXPECT_TRUE(omega.all_well_typed());
    EXPECT_FALSE(omega.all_valid());
    for (const auto& e : omega.entries) EXPECT_FALSE(e.validity.witness.empty());
    auto srv = check_program(corpus::load("omega_server.csll"));
    EXPECT_TRUE(srv.all_well_typed());
    EXPECT_FALSE(srv.all_valid());
}

TEST(GenLink, Bot) {
    Program p = gen_link(t_bot());
    ASSERT_EQ(p.defs.size(), 1u);
    const Definition& d = p.defs.begin()->second;
    EXPECT_EQ(pretty(d), "def Link_bot(x: bot, y: 1) = wait x; close y");
}

TEST(GenLink, Top) {
    Program p = gen_link(t_top());
    ASSERT_EQ(p.defs.size(), 1u);
    EXPECT_EQ(pretty(p.defs.begin()->second), "def Link_top(x: top, y: 0) = fail x");
    EXPECT_TRUE(check_program(p).all_valid());
}

TEST(GenLink, OneDispatchesToTheDual) {
    Program p = gen_link(t_one());
    const Definition* d = p.find(link_name(t_one()));
    ASSERT_NE(d, nullptr);
    const Call* c = as<Call>(d->body);
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->name, "Link_bot");
    EXPECT_EQ(c->args, (std::vector<Chan>{d->params[1].first, d->params[0].first}));
}

TEST(GenLink, ServerCycleCrossesItsServer) {
    Type t = t_server(t_bot());
    Program p = gen_link(t);
    const Definition* d = p.find(link_name(t));
    ASSERT_NE(d, nullptr);
    EXPECT_EQ(pretty(*d),
              "def Link_srvbot(x: srv bot, y: cli 1) = server x(u) { client y(v) { Link_bot(u, v) }; "
              "Link_srvbot(x, y) } idle { done y }");
    Derivation der = check_definition(*d, p);
    ValidityReport v = validity_check(der);
    EXPECT_EQ(v.verdict, Verdict::Valid) << v.reason;
}

TEST(GenLink, AllTypesUpToDepthThreeAreValid) {
    auto types = gen::all_types_up_to(3);
    ASSERT_EQ(types.size(), 23260u);
    for (size_t i = 0; i < types.size(); i += (i < 80 ? 1 : 7)) {
        Program p = gen_link(types[i]);
        ProgramReport rep = check_program(p);
        ASSERT_TRUE(rep.all_well_typed()) << type_key(types[i]);
        ASSERT_TRUE(rep.all_valid()) << type_key(types[i]);
    }
}

TEST(Regularity, CallJudgmentsAreFixedByAnnotations) {
    for (const auto& f : corpus::files()) {
        Program prog = corpus::load(f);
        for (const auto& [name, d] : prog.defs) {
            Derivation der = check_definition(d, prog);
            std::set<std::string> judgments;
            for (const auto& node : der.nodes) {
                if (node.rule != "call") continue;
                std::multiset<std::string> types;
                for (const auto& [c, t] : node.judgment.context) types.insert(type_key(t));
                std::string key = node.def_name;
                for (const auto& t : types) key += " " + t;
                judgments.insert(key);
            }
            EXPECT_LE(judgments.size(), prog.defs.size()) << f << " " << name;
        }
    }
}

TEST(SubjectReduction, CorpusGraphs) {
    int edges = 0;
    for (const auto& f : corpus::files()) {
        Program prog = corpus::load(f);
        TypeContext g = param_context(*prog.main);
        ReductionGraph graph = explore(prog.main->body, prog, 5000);
        for (size_t s = 0; s < graph.states.size(); ++s)
            for (const auto& e : graph.edges[s]) {
                ++edges;
                EXPECT_NO_THROW(check(graph.states[e.target], g, prog)) << f << ": " << pretty(graph.states[e.target]);
            }
    }
    EXPECT_GT(edges, 20);
}

TEST(SubjectReduction, GeneratedPrograms) {
    gen::Rng r(32);
    for (int i = 0; i < 200; ++i) {
        auto g = gen::random_program(r, 8);
        ReductionGraph graph = explore(g.program.main->body, g.program, 500);
        for (size_t s = 0; s < graph.states.size(); ++s)
            for (const auto& step : step_all(graph.states[s], g.program))
                ASSERT_NO_THROW(check(step.result, g.context(), g.program)) << pretty(g.program);
    }
}

TEST(Validity, GeneratedProgramsAreValid) {
    gen::Rng r(33);
    for (int i = 0; i < 300; ++i) {
        auto g = gen::random_program(r, 10);
        ProgramReport rep = check_program(g.program);
        ASSERT_TRUE(rep.all_well_typed()) << pretty(g.program);
        ASSERT_TRUE(rep.all_valid()) << pretty(g.program);
    }
}
