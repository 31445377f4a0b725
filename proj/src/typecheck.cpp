#include "csll/typecheck.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "csll/parser.hpp"

namespace csll {

TypeError::TypeError(TypeErrorKind k, const std::string& msg, SourceSpan s, std::string r)
    : std::runtime_error(msg), kind(k), span(std::move(s)), rule(std::move(r)) {}

std::string describe(const TypeContext& g) {
    std::string out;
    for (auto& [c, t] : g) {
        if (!out.empty()) out += ", ";
        out += c.name + " : " + pretty(t);
    }
    return out;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Valid: return "valid";
        case Verdict::Invalid: return "invalid";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

std::pair<TypeContext, TypeContext> split_context(const TypeContext& g, const std::set<Chan>& fn_left,
                                                  const std::set<Chan>& fn_right, bool absorb_left,
                                                  bool absorb_right) {
    TypeContext l, r;
    for (auto& c : fn_left)
        if (!g.count(c)) throw TypeError(TypeErrorKind::Linearity, "channel " + c.name + " is not available here", {});
    for (auto& c : fn_right)
        if (!g.count(c)) throw TypeError(TypeErrorKind::Linearity, "channel " + c.name + " is not available here", {});
    for (auto& [c, t] : g) {
        bool inl = fn_left.count(c) > 0, inr = fn_right.count(c) > 0;
        if (inl && inr) throw TypeError(TypeErrorKind::Linearity, "channel " + c.name + " is used by both sides", {});
        if (inl)
            l[c] = t;
        else if (inr)
            r[c] = t;
        else if (absorb_left)
            l[c] = t;
        else if (absorb_right)
            r[c] = t;
        else
            throw TypeError(TypeErrorKind::Linearity, "channel " + c.name + " is never used", {});
    }
    return {l, r};
}

bool can_absorb(const Proc& p) {
    return std::visit(
        [](const auto& n) -> bool {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Fail>) return true;
            else if constexpr (std::is_same_v<N, Wait> || std::is_same_v<N, Join> || std::is_same_v<N, Select>)
                return can_absorb(n.p);
            else if constexpr (std::is_same_v<N, Case> || std::is_same_v<N, Server>)
                return can_absorb(n.p) && can_absorb(n.q);
            else if constexpr (std::is_same_v<N, Fork> || std::is_same_v<N, Cut> || std::is_same_v<N, Cons>)
                return can_absorb(n.p) || can_absorb(n.q);
            else
                return false;
        },
        p->node);
}

// ---------------------------------------------------------------- checking

namespace {

class Checker {
public:
    explicit Checker(const Program& prog) : prog_(prog) {}

    Derivation run(const Proc& p, const TypeContext& g) {
        d_.root = node(p, g);
        return std::move(d_);
    }

private:
    struct Ancestor {
        int node;
        std::string def;
        std::vector<Chan> args;
    };
    const Program& prog_;
    Derivation d_;
    std::vector<Ancestor> path_;

    [[noreturn]] static void fail(TypeErrorKind k, const std::string& msg, const Proc& p, const std::string& rule) {
        throw TypeError(k, msg, p->span, rule);
    }

    static const char* kind_word(TypeKind k) {
        switch (k) {
            case TypeKind::Bot: return "bot";
            case TypeKind::One: return "1";
            case TypeKind::Top: return "top";
            case TypeKind::Zero: return "0";
            case TypeKind::Par: return "a par type";
            case TypeKind::Tensor: return "a tensor type";
            case TypeKind::With: return "a & type";
            case TypeKind::Plus: return "a + type";
            case TypeKind::Server: return "a srv type";
            case TypeKind::Client: return "a cli type";
        }
        return "?";
    }

    Type expect(const TypeContext& g, const Chan& x, TypeKind k, const Proc& p, const std::string& rule) {
        auto it = g.find(x);
        if (it == g.end()) fail(TypeErrorKind::Linearity, "channel " + x.name + " is not in the context", p, rule);
        const Type& t = it->second;
        if (t->kind == TypeKind::Zero)
            fail(TypeErrorKind::ZeroPosition, "channel " + x.name + " has type 0, which no process can use", p, rule);
        if (t->kind != k)
            fail(TypeErrorKind::Mismatch,
                 "channel " + x.name + " has type " + pretty(t) + " but '" + constructor_name(p) + "' needs " +
                     kind_word(k),
                 p, rule);
        return t;
    }

    static TypeContext without(TypeContext g, const Chan& x) {
        g.erase(x);
        return g;
    }
    static TypeContext with(TypeContext g, const Chan& x, const Type& t) {
        g[x] = t;
        return g;
    }

    void exact(const TypeContext& g, const Chan& x, const Proc& p, const std::string& rule) {
        if (g.size() == 1) return;
        std::string extra;
        for (auto& [c, t] : g)
            if (!(c == x)) extra += (extra.empty() ? "" : ", ") + c.name;
        fail(TypeErrorKind::Linearity, "channels left unused: " + extra, p, rule);
    }

    std::pair<TypeContext, TypeContext> split(const TypeContext& g, const Proc& l, const Chan* bl, const Proc& r,
                                              const Chan* br, const Proc& at, const std::string& rule) {
        auto fl = free_names(l), fr = free_names(r);
        if (bl) fl.erase(*bl);
        if (br) fr.erase(*br);
        try {
            return split_context(g, fl, fr, can_absorb(l), can_absorb(r));
        } catch (TypeError& e) {
            fail(e.kind, e.what(), at, rule);
        }
    }

    int add(const Proc& p, const TypeContext& g) {
        d_.nodes.push_back(DerivNode{Judgment{p, g}, "", std::nullopt, "", {}});
        return static_cast<int>(d_.nodes.size()) - 1;
    }

    void set(int id, std::string rule, std::optional<Chan> subj) {
        d_.nodes[id].rule = std::move(rule);
        d_.nodes[id].subject = std::move(subj);
    }

    void premise(int id, const Proc& p, const TypeContext& g) {
        int c = node(p, g);
        d_.nodes[id].premises.push_back(DerivEdge{c, false, {}});
    }

    int node(const Proc& p, const TypeContext& g) {
        int id = add(p, g);
        std::visit([&](const auto& n) { rule(id, p, g, n); }, p->node);
        return id;
    }

    void rule(int id, const Proc& p, const TypeContext& g, const Close& n) {
        set(id, "one", n.x);
        expect(g, n.x, TypeKind::One, p, "one");
        exact(g, n.x, p, "one");
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Nil& n) {
        set(id, "done", n.x);
        expect(g, n.x, TypeKind::Client, p, "done");
        exact(g, n.x, p, "done");
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Fail& n) {
        set(id, "top", n.x);
        expect(g, n.x, TypeKind::Top, p, "top");
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Wait& n) {
        set(id, "bot", n.x);
        expect(g, n.x, TypeKind::Bot, p, "bot");
        premise(id, n.p, without(g, n.x));
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Join& n) {
        set(id, "par", n.x);
        auto t = expect(g, n.x, TypeKind::Par, p, "par");
        auto g2 = with(g, n.x, t->right);
        g2[n.y] = t->left;
        premise(id, n.p, g2);
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Fork& n) {
        set(id, "tensor", n.x);
        auto t = expect(g, n.x, TypeKind::Tensor, p, "tensor");
        auto [l, r] = split(without(g, n.x), n.p, &n.y, n.q, &n.x, p, "tensor");
        premise(id, n.p, with(l, n.y, t->left));
        premise(id, n.q, with(r, n.x, t->right));
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Case& n) {
        set(id, "with", n.x);
        auto t = expect(g, n.x, TypeKind::With, p, "with");
        premise(id, n.p, with(g, n.x, t->left));
        premise(id, n.q, with(g, n.x, t->right));
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Select& n) {
        set(id, "plus", n.x);
        auto t = expect(g, n.x, TypeKind::Plus, p, "plus");
        premise(id, n.p, with(g, n.x, n.label == Label::In1 ? t->left : t->right));
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Server& n) {
        set(id, "server", n.x);
        auto t = expect(g, n.x, TypeKind::Server, p, "server");
        premise(id, n.p, with(g, n.y, t->left));
        premise(id, n.q, without(g, n.x));
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Cons& n) {
        set(id, "client", n.x);
        auto t = expect(g, n.x, TypeKind::Client, p, "client");
        auto [l, r] = split(without(g, n.x), n.p, &n.y, n.q, &n.x, p, "client");
        premise(id, n.p, with(l, n.y, t->left));
        premise(id, n.q, with(r, n.x, t));
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Cut& n) {
        set(id, "cut", std::nullopt);
        auto [l, r] = split(g, n.p, &n.x, n.q, &n.x, p, "cut");
        premise(id, n.p, with(l, n.x, n.type));
        premise(id, n.q, with(r, n.x, dual_type(n.type)));
    }
    void rule(int id, const Proc& p, const TypeContext& g, const Call& n) {
        set(id, "call", std::nullopt);
        d_.nodes[id].def_name = n.name;
        const Definition* def = prog_.find(n.name);
        if (!def) fail(TypeErrorKind::Undefined, "undefined process " + n.name, p, "call");
        if (def->params.size() != n.args.size())
            fail(TypeErrorKind::Arity,
                 n.name + " expects " + std::to_string(def->params.size()) + " arguments, got " +
                     std::to_string(n.args.size()),
                 p, "call");
        std::set<Chan> seen;
        for (size_t i = 0; i < n.args.size(); ++i) {
            const Chan& a = n.args[i];
            if (!seen.insert(a).second)
                fail(TypeErrorKind::Linearity, "channel " + a.name + " passed twice to " + n.name, p, "call");
            auto it = g.find(a);
            if (it == g.end()) fail(TypeErrorKind::Linearity, "channel " + a.name + " is not in the context", p, "call");
            if (!type_equal(it->second, def->params[i].second))
                fail(TypeErrorKind::Mismatch,
                     "argument " + a.name + " of " + n.name + " has type " + pretty(it->second) + ", expected " +
                         pretty(def->params[i].second),
                     p, "call");
        }
        if (g.size() != n.args.size()) {
            std::string extra;
            for (auto& [c, t] : g)
                if (!seen.count(c)) extra += (extra.empty() ? "" : ", ") + c.name;
            fail(TypeErrorKind::Linearity, "channels left unused: " + extra, p, "call");
        }
        for (auto it = path_.rbegin(); it != path_.rend(); ++it) {
            if (it->def != n.name) continue;
            DerivEdge e{it->node, true, {}};
            for (size_t i = 0; i < n.args.size(); ++i) e.corr[n.args[i]] = it->args[i];
            d_.nodes[id].premises.push_back(e);
            return;
        }
        path_.push_back({id, n.name, n.args});
        premise(id, instantiate(*def, n.args), g);
        path_.pop_back();
    }
};

}  // namespace

Derivation check(const Proc& p, const TypeContext& g, const Program& prog) {
    for (auto& c : free_names(p))
        if (!g.count(c)) throw TypeError(TypeErrorKind::Linearity, "channel " + c.name + " is not in the context", p->span);
    return Checker(prog).run(p, g);
}

// ---------------------------------------------------------------- validity

namespace {

// One arc of a size-change graph: channel `from` at the source cut point
// becomes `to` at the target; `strict` if a server on it was crossed.
struct Arc {
    std::uint64_t from, to;
    bool strict;
    auto operator<=>(const Arc&) const = default;
};

struct SCGraph {
    int src, tgt;
    std::vector<Arc> arcs;  // sorted, at most one per (from, to)
    std::vector<int> word;  // node path witnessing the graph
};

std::vector<Arc> normalize(std::vector<Arc> arcs) {
    std::sort(arcs.begin(), arcs.end());
    std::vector<Arc> out;
    for (auto& a : arcs) {
        if (!out.empty() && out.back().from == a.from && out.back().to == a.to) {
            out.back().strict = out.back().strict || a.strict;
            continue;
        }
        out.push_back(a);
    }
    return out;
}

std::vector<Arc> compose(const std::vector<Arc>& a, const std::vector<Arc>& b) {
    std::vector<Arc> out;
    for (auto& x : a)
        for (auto& y : b)
            if (x.to == y.from) out.push_back({x.from, y.to, x.strict || y.strict});
    return normalize(out);
}

}  // namespace

ValidityReport validity_check(const Derivation& d, int bound) {
    ValidityReport rep;
    std::set<int> cut_points;
    for (auto& n : d.nodes)
        for (auto& e : n.premises)
            if (e.back) cut_points.insert(e.target);
    if (cut_points.empty()) return rep;

    // base graphs: one per segment between cut points
    std::vector<SCGraph> base;
    for (int a : cut_points) {
        struct Item {
            int node;
            std::map<std::uint64_t, std::pair<std::uint64_t, bool>> live;  // current id -> (origin id, strict)
            std::vector<int> word;
        };
        std::vector<Item> stack;
        Item start{a, {}, {}};
        for (auto& [c, t] : d.nodes[a].judgment.context) start.live[c.id] = {c.id, false};
        stack.push_back(start);
        while (!stack.empty()) {
            Item it = std::move(stack.back());
            stack.pop_back();
            const DerivNode& n = d.nodes[it.node];
            if (it.node != a && cut_points.count(it.node)) {
                std::vector<Arc> arcs;
                for (auto& [cur, o] : it.live) arcs.push_back({o.first, cur, o.second});
                base.push_back({a, it.node, normalize(arcs), it.word});
                continue;
            }
            it.word.push_back(it.node);
            if (n.rule == "server" && n.subject) {
                auto f = it.live.find(n.subject->id);
                if (f != it.live.end()) f->second.second = true;
            }
            for (auto& e : n.premises) {
                if (e.back) {
                    std::vector<Arc> arcs;
                    for (auto& [cur, o] : it.live)
                        for (auto& [s, t] : e.corr)
                            if (s.id == cur) arcs.push_back({o.first, t.id, o.second});
                    base.push_back({a, e.target, normalize(arcs), it.word});
                    continue;
                }
                Item next{e.target, {}, it.word};
                for (auto& [c, t] : d.nodes[e.target].judgment.context) {
                    auto f = it.live.find(c.id);
                    if (f != it.live.end()) next.live[c.id] = f->second;
                }
                stack.push_back(std::move(next));
            }
        }
    }

    using Key = std::tuple<int, int, std::vector<Arc>>;
    std::map<Key, SCGraph> closure;
    auto insert = [&](SCGraph g) {
        Key k{g.src, g.tgt, g.arcs};
        auto it = closure.find(k);
        if (it == closure.end()) {
            closure.emplace(k, std::move(g));
            return true;
        }
        if (g.word.size() < it->second.word.size()) it->second.word = g.word;
        return false;
    };
    for (auto& g : base) insert(g);

    auto bad_idempotent = [&]() -> const SCGraph* {
        for (auto& [k, g] : closure) {
            if (g.src != g.tgt) continue;
            if (compose(g.arcs, g.arcs) != g.arcs) continue;
            bool good = false;
            for (auto& a : g.arcs)
                if (a.from == a.to && a.strict) good = true;
            if (!good) return &g;
        }
        return nullptr;
    };

    for (int round = 0;; ++round) {
        rep.rounds = round;
        if (auto g = bad_idempotent()) {
            rep.verdict = Verdict::Invalid;
            rep.witness = g->word;
            rep.reason = "cycle through " + std::to_string(g->word.size()) +
                         " nodes never crosses a server on a channel that persists around it";
            return rep;
        }
        if (round >= bound) break;
        std::vector<SCGraph> cur;
        for (auto& [k, g] : closure) cur.push_back(g);
        bool grew = false;
        for (auto& g : cur)
            for (auto& h : cur) {
                if (g.tgt != h.src) continue;
                std::vector<int> w = g.word;
                w.insert(w.end(), h.word.begin(), h.word.end());
                if (insert(SCGraph{g.src, h.tgt, compose(g.arcs, h.arcs), w})) grew = true;
            }
        if (!grew) return rep;
    }
    rep.verdict = Verdict::Inconclusive;
    rep.reason = "cycle closure not saturated after " + std::to_string(bound) + " rounds";
    return rep;
}

// ---------------------------------------------------------------- programs

bool ProgramReport::all_well_typed() const {
    return std::all_of(entries.begin(), entries.end(), [](const EntryReport& e) { return e.well_typed; });
}
bool ProgramReport::all_valid() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const EntryReport& e) { return e.well_typed && e.validity.verdict == Verdict::Valid; });
}
bool ProgramReport::any_inconclusive() const {
    return std::any_of(entries.begin(), entries.end(), [](const EntryReport& e) {
        return e.well_typed && e.validity.verdict == Verdict::Inconclusive;
    });
}

TypeContext param_context(const Definition& d) {
    TypeContext g;
    for (auto& [c, t] : d.params) g[c] = t;
    return g;
}

Derivation check_definition(const Definition& d, const Program& prog) {
    std::vector<Chan> args;
    for (auto& [c, t] : d.params) args.push_back(c);
    return check(make_proc(Call{d.name, args}, d.span), param_context(d), prog);
}

EntryReport check_entry(const Definition& d, bool is_main, const Program& prog, int bound) {
    EntryReport r;
    r.name = is_main ? "main" : d.name;
    r.is_main = is_main;
    try {
        r.derivation = is_main ? check(d.body, param_context(d), prog) : check_definition(d, prog);
        r.well_typed = true;
        r.validity = validity_check(*r.derivation, bound);
    } catch (const TypeError& e) {
        r.error = e.what();
        r.error_kind = e.kind;
        r.error_span = e.span;
    } catch (const CoreError& e) {
        r.error = e.what();
    }
    return r;
}

ProgramReport check_program(const Program& prog, int bound) {
    ProgramReport rep;
    for (auto& [name, d] : prog.defs) rep.entries.push_back(check_entry(d, false, prog, bound));
    if (prog.main) rep.entries.push_back(check_entry(*prog.main, true, prog, bound));
    return rep;
}

// ---------------------------------------------------------------- forwarders

std::string link_name(const Type& t) { return "Link_" + type_key(t); }

namespace {

void add_link(const Type& t, Program& prog) {
    std::string name = link_name(t);
    if (prog.defs.count(name)) return;
    Chan x = fresh_channel("x"), y = fresh_channel("y");
    Definition d{name, {{x, t}, {y, dual_type(t)}}, nullptr, {}};
    prog.defs[name] = d;  // reserve before recursing
    Proc body;
    if (is_positive(t)) {
        Type dt = dual_type(t);
        body = p_call(link_name(dt), {y, x});
        add_link(dt, prog);
    } else {
        switch (t->kind) {
            case TypeKind::Bot: body = p_wait(x, p_close(y)); break;
            case TypeKind::Top: body = p_fail(x); break;
            case TypeKind::Par: {
                Chan u = fresh_channel("u"), v = fresh_channel("v");
                body = p_join(x, u, p_fork(y, v, p_call(link_name(t->left), {u, v}), p_call(link_name(t->right), {x, y})));
                add_link(t->left, prog);
                add_link(t->right, prog);
                break;
            }
            case TypeKind::With: {
                body = p_case(x, p_select(y, Label::In1, p_call(link_name(t->left), {x, y})),
                              p_select(y, Label::In2, p_call(link_name(t->right), {x, y})));
                add_link(t->left, prog);
                add_link(t->right, prog);
                break;
            }
            case TypeKind::Server: {
                Chan u = fresh_channel("u"), v = fresh_channel("v");
                body = p_server(x, u, p_cons(y, v, p_call(link_name(t->left), {u, v}), p_call(name, {x, y})),
                                p_nil(y));
                add_link(t->left, prog);
                break;
            }
            default: break;
        }
    }
    prog.defs[name].body = body;
}

}  // namespace

Program gen_link(const Type& t) {
    Program prog;
    add_link(t, prog);
    return prog;
}

}  // namespace csll
