#include "csll/core.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

namespace csll {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
}

Chan fresh_channel(const std::string& name) {
    return Chan{name, g_next_id.fetch_add(1)};
}

// ---------------------------------------------------------------- types

Type make_type(TypeKind k, Type l, Type r) {
    return std::make_shared<const SessionType>(SessionType{k, std::move(l), std::move(r)});
}
Type t_bot() { return make_type(TypeKind::Bot); }
Type t_one() { return make_type(TypeKind::One); }
Type t_top() { return make_type(TypeKind::Top); }
Type t_zero() { return make_type(TypeKind::Zero); }
Type t_par(Type a, Type b) { return make_type(TypeKind::Par, std::move(a), std::move(b)); }
Type t_tensor(Type a, Type b) { return make_type(TypeKind::Tensor, std::move(a), std::move(b)); }
Type t_with(Type a, Type b) { return make_type(TypeKind::With, std::move(a), std::move(b)); }
Type t_plus(Type a, Type b) { return make_type(TypeKind::Plus, std::move(a), std::move(b)); }
Type t_server(Type a) { return make_type(TypeKind::Server, std::move(a)); }
Type t_client(Type a) { return make_type(TypeKind::Client, std::move(a)); }

bool is_binary(TypeKind k) {
    return k == TypeKind::Par || k == TypeKind::Tensor || k == TypeKind::With || k == TypeKind::Plus;
}
bool is_unary(TypeKind k) { return k == TypeKind::Server || k == TypeKind::Client; }

bool type_equal(const Type& a, const Type& b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    if (is_binary(a->kind)) return type_equal(a->left, b->left) && type_equal(a->right, b->right);
    if (is_unary(a->kind)) return type_equal(a->left, b->left);
    return true;
}

static TypeKind dual_kind(TypeKind k) {
    switch (k) {
        case TypeKind::Bot: return TypeKind::One;
        case TypeKind::One: return TypeKind::Bot;
        case TypeKind::Top: return TypeKind::Zero;
        case TypeKind::Zero: return TypeKind::Top;
        case TypeKind::Par: return TypeKind::Tensor;
        case TypeKind::Tensor: return TypeKind::Par;
        case TypeKind::With: return TypeKind::Plus;
        case TypeKind::Plus: return TypeKind::With;
        case TypeKind::Server: return TypeKind::Client;
        case TypeKind::Client: return TypeKind::Server;
    }
    return k;
}

Type dual_type(const Type& t) {
    if (is_binary(t->kind)) return make_type(dual_kind(t->kind), dual_type(t->left), dual_type(t->right));
    if (is_unary(t->kind)) return make_type(dual_kind(t->kind), dual_type(t->left));
    return make_type(dual_kind(t->kind));
}

int type_depth(const Type& t) {
    if (is_binary(t->kind)) return 1 + std::max(type_depth(t->left), type_depth(t->right));
    if (is_unary(t->kind)) return 1 + type_depth(t->left);
    return 1;
}

bool is_positive(const Type& t) {
    switch (t->kind) {
        case TypeKind::One:
        case TypeKind::Zero:
        case TypeKind::Tensor:
        case TypeKind::Plus:
        case TypeKind::Client: return true;
        default: return false;
    }
}

std::string type_key(const Type& t) {
    switch (t->kind) {
        case TypeKind::Bot: return "bot";
        case TypeKind::One: return "one";
        case TypeKind::Top: return "top";
        case TypeKind::Zero: return "zero";
        case TypeKind::Par: return "par" + type_key(t->left) + type_key(t->right);
        case TypeKind::Tensor: return "tensor" + type_key(t->left) + type_key(t->right);
        case TypeKind::With: return "with" + type_key(t->left) + type_key(t->right);
        case TypeKind::Plus: return "plus" + type_key(t->left) + type_key(t->right);
        case TypeKind::Server: return "srv" + type_key(t->left);
        case TypeKind::Client: return "cli" + type_key(t->left);
    }
    return "?";
}

// ---------------------------------------------------------------- processes

Proc make_proc(ProcNode n, SourceSpan span) {
    return std::make_shared<const Process>(Process{std::move(n), std::move(span)});
}
Proc p_call(std::string name, std::vector<Chan> args) { return make_proc(Call{std::move(name), std::move(args)}); }
Proc p_fail(Chan x) { return make_proc(Fail{std::move(x)}); }
Proc p_wait(Chan x, Proc p) { return make_proc(Wait{std::move(x), std::move(p)}); }
Proc p_close(Chan x) { return make_proc(Close{std::move(x)}); }
Proc p_fork(Chan x, Chan y, Proc p, Proc q) { return make_proc(Fork{std::move(x), std::move(y), std::move(p), std::move(q)}); }
Proc p_join(Chan x, Chan y, Proc p) { return make_proc(Join{std::move(x), std::move(y), std::move(p)}); }
Proc p_select(Chan x, Label l, Proc p) { return make_proc(Select{std::move(x), l, std::move(p)}); }
Proc p_case(Chan x, Proc p, Proc q) { return make_proc(Case{std::move(x), std::move(p), std::move(q)}); }
Proc p_server(Chan x, Chan y, Proc p, Proc q) { return make_proc(Server{std::move(x), std::move(y), std::move(p), std::move(q)}); }
Proc p_cons(Chan x, Chan y, Proc p, Proc q) { return make_proc(Cons{std::move(x), std::move(y), std::move(p), std::move(q)}); }
Proc p_nil(Chan x) { return make_proc(Nil{std::move(x)}); }
Proc p_cut(Chan x, Type t, Proc p, Proc q) { return make_proc(Cut{std::move(x), std::move(t), std::move(p), std::move(q)}); }

std::optional<Chan> subject(const Proc& p) {
    return std::visit(
        [](const auto& n) -> std::optional<Chan> {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Call> || std::is_same_v<N, Cut>)
                return std::nullopt;
            else
                return n.x;
        },
        p->node);
}

bool is_guard(const Proc& p) { return subject(p).has_value(); }

std::string constructor_name(const Proc& p) {
    static const char* names[] = {"call", "fail", "wait", "close", "send", "recv", "select",
                                  "case", "server", "client", "done", "new"};
    return names[p->node.index()];
}

const Definition* Program::find(const std::string& name) const {
    auto it = defs.find(name);
    return it == defs.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------- names

static void collect_fn(const Proc& p, std::set<Chan>& out, const std::set<Chan>& bound);

static void collect_fn_bind(const Proc& p, const Chan& y, std::set<Chan>& out, const std::set<Chan>& bound) {
    auto b = bound;
    b.insert(y);
    collect_fn(p, out, b);
}

static void collect_fn(const Proc& p, std::set<Chan>& out, const std::set<Chan>& bound) {
    auto add = [&](const Chan& c) {
        if (!bound.count(c)) out.insert(c);
    };
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Call>) {
                for (auto& a : n.args) add(a);
            } else if constexpr (std::is_same_v<N, Fail> || std::is_same_v<N, Close> || std::is_same_v<N, Nil>) {
                add(n.x);
            } else if constexpr (std::is_same_v<N, Wait> || std::is_same_v<N, Select>) {
                add(n.x);
                collect_fn(n.p, out, bound);
            } else if constexpr (std::is_same_v<N, Fork> || std::is_same_v<N, Cons> || std::is_same_v<N, Server>) {
                add(n.x);
                collect_fn_bind(n.p, n.y, out, bound);
                collect_fn(n.q, out, bound);
            } else if constexpr (std::is_same_v<N, Join>) {
                add(n.x);
                collect_fn_bind(n.p, n.y, out, bound);
            } else if constexpr (std::is_same_v<N, Case>) {
                add(n.x);
                collect_fn(n.p, out, bound);
                collect_fn(n.q, out, bound);
            } else if constexpr (std::is_same_v<N, Cut>) {
                collect_fn_bind(n.p, n.x, out, bound);
                collect_fn_bind(n.q, n.x, out, bound);
            }
        },
        p->node);
}

std::set<Chan> free_names(const Proc& p) {
    std::set<Chan> out;
    collect_fn(p, out, {});
    return out;
}

void for_each_subterm(const Proc& p, const std::function<void(const Proc&)>& f) {
    f(p);
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Wait> || std::is_same_v<N, Select> || std::is_same_v<N, Join>) {
                for_each_subterm(n.p, f);
            } else if constexpr (std::is_same_v<N, Fork> || std::is_same_v<N, Cons> || std::is_same_v<N, Server> ||
                                 std::is_same_v<N, Case> || std::is_same_v<N, Cut>) {
                for_each_subterm(n.p, f);
                for_each_subterm(n.q, f);
            }
        },
        p->node);
}

std::set<Chan> bound_names(const Proc& p) {
    std::set<Chan> out;
    for_each_subterm(p, [&](const Proc& q) {
        std::visit(
            [&](const auto& n) {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Fork> || std::is_same_v<N, Cons> || std::is_same_v<N, Server> ||
                              std::is_same_v<N, Join>)
                    out.insert(n.y);
                else if constexpr (std::is_same_v<N, Cut>)
                    out.insert(n.x);
            },
            q->node);
    });
    return out;
}

// ---------------------------------------------------------------- renaming

namespace {

struct Renamer {
    bool refresh_all;

    Chan look(const std::map<Chan, Chan>& m, const Chan& c) const {
        auto it = m.find(c);
        return it == m.end() ? c : it->second;
    }

    bool clashes(const std::map<Chan, Chan>& m, const Chan& y) const {
        if (m.count(y)) return true;
        for (auto& [k, v] : m)
            if (v == y) return true;
        return false;
    }

    // binder y: returns the new binder and the map to use under it
    std::pair<Chan, std::map<Chan, Chan>> bind(const std::map<Chan, Chan>& m, const Chan& y) const {
        if (refresh_all || clashes(m, y)) {
            auto y2 = refresh(y);
            auto m2 = m;
            m2[y] = y2;
            return {y2, m2};
        }
        return {y, m};
    }

    Proc go(const Proc& p, const std::map<Chan, Chan>& m) const {
        return std::visit(
            [&](const auto& n) -> Proc {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Call>) {
                    std::vector<Chan> args;
                    for (auto& a : n.args) args.push_back(look(m, a));
                    return make_proc(Call{n.name, args}, p->span);
                } else if constexpr (std::is_same_v<N, Fail>) {
                    return make_proc(Fail{look(m, n.x)}, p->span);
                } else if constexpr (std::is_same_v<N, Close>) {
                    return make_proc(Close{look(m, n.x)}, p->span);
                } else if constexpr (std::is_same_v<N, Nil>) {
                    return make_proc(Nil{look(m, n.x)}, p->span);
                } else if constexpr (std::is_same_v<N, Wait>) {
                    return make_proc(Wait{look(m, n.x), go(n.p, m)}, p->span);
                } else if constexpr (std::is_same_v<N, Select>) {
                    return make_proc(Select{look(m, n.x), n.label, go(n.p, m)}, p->span);
                } else if constexpr (std::is_same_v<N, Case>) {
                    return make_proc(Case{look(m, n.x), go(n.p, m), go(n.q, m)}, p->span);
                } else if constexpr (std::is_same_v<N, Join>) {
                    auto [y, m2] = bind(m, n.y);
                    return make_proc(Join{look(m, n.x), y, go(n.p, m2)}, p->span);
                } else if constexpr (std::is_same_v<N, Cut>) {
                    auto [x, m2] = bind(m, n.x);
                    return make_proc(Cut{x, n.type, go(n.p, m2), go(n.q, m2)}, p->span);
                } else {
                    // Fork, Cons, Server: y bound in p only
                    auto [y, m2] = bind(m, n.y);
                    return make_proc(N{look(m, n.x), y, go(n.p, m2), go(n.q, m)}, p->span);
                }
            },
            p->node);
    }
};

}  // namespace

Proc rename(const Proc& p, const std::map<Chan, Chan>& m) { return Renamer{false}.go(p, m); }

Proc freshen(const Proc& p) { return Renamer{true}.go(p, {}); }

Proc instantiate(const Definition& def, const std::vector<Chan>& args) {
    if (args.size() != def.params.size())
        throw CoreError("arity mismatch calling " + def.name + ": expected " + std::to_string(def.params.size()) +
                        ", got " + std::to_string(args.size()));
    std::map<Chan, Chan> m;
    for (size_t i = 0; i < args.size(); ++i) m[def.params[i].first] = args[i];
    return Renamer{true}.go(def.body, m);
}

// ---------------------------------------------------------------- unfolding

namespace {

struct DepthCalc {
    const Program& prog;
    std::map<std::string, int> memo;
    std::set<std::string> active;
    bool diverges = false;

    int def_depth(const std::string& name) {
        if (auto it = memo.find(name); it != memo.end()) return it->second;
        if (active.count(name)) {
            diverges = true;
            return 0;
        }
        const Definition* d = prog.find(name);
        if (!d) throw CoreError("undefined process " + name);
        active.insert(name);
        int r = 1 + depth(d->body);
        active.erase(name);
        if (!diverges) memo[name] = r;
        return r;
    }

    int depth(const Proc& p) {
        if (auto c = as<Call>(p)) return def_depth(c->name);
        if (auto c = as<Cut>(p)) return 1 + std::max(depth(c->p), depth(c->q));
        return 0;
    }
};

}  // namespace

CallDepth call_depth(const Proc& p, const Program& prog) {
    DepthCalc dc{prog, {}, {}, false};
    int d = dc.depth(p);
    return {dc.diverges, dc.diverges ? 0 : d};
}

Proc unfold(const Proc& p, const Program& prog) {
    auto cd = call_depth(p, prog);
    if (cd.diverges) throw CoreError("unguarded recursion: unfolding does not terminate");
    std::function<Proc(const Proc&)> go = [&](const Proc& q) -> Proc {
        if (auto c = as<Call>(q)) {
            const Definition* d = prog.find(c->name);
            if (!d) throw CoreError("undefined process " + c->name);
            return go(instantiate(*d, c->args));
        }
        if (auto c = as<Cut>(q)) {
            auto a = go(c->p), b = go(c->q);
            if (a == c->p && b == c->q) return q;
            return make_proc(Cut{c->x, c->type, a, b}, q->span);
        }
        return q;
    };
    return go(p);
}

int count_threads(const Proc& p) {
    if (auto c = as<Cut>(p)) return count_threads(c->p) + count_threads(c->q);
    return 1;
}

int count_channels(const Proc& p) {
    if (auto c = as<Cut>(p)) return 1 + count_channels(c->p) + count_channels(c->q);
    return 0;
}

bool has_unguarded_call(const Proc& p) {
    if (as<Call>(p)) return true;
    if (auto c = as<Cut>(p)) return has_unguarded_call(c->p) || has_unguarded_call(c->q);
    return false;
}

// ---------------------------------------------------------------- nests

namespace {

void flatten_into(const Proc& p, Nest& n, std::vector<int>& mine) {
    if (auto c = as<Cut>(p)) {
        std::vector<int> a, b;
        flatten_into(c->p, n, a);
        flatten_into(c->q, n, b);
        auto pick = [&](const std::vector<int>& side) {
            for (int v : side)
                if (free_names(n.vertices[v]).count(c->x)) return v;
            return side.front();
        };
        n.edges.push_back(NestEdge{c->x, c->type, pick(a), pick(b)});
        mine.insert(mine.end(), a.begin(), a.end());
        mine.insert(mine.end(), b.begin(), b.end());
        return;
    }
    mine.push_back(static_cast<int>(n.vertices.size()));
    n.vertices.push_back(p);
}

}  // namespace

Nest flatten_nest(const Proc& p) {
    Nest n;
    std::vector<int> all;
    flatten_into(p, n, all);
    return n;
}

Proc rebuild_nest(const Nest& n, int root) {
    std::vector<std::vector<int>> adj(n.vertices.size());
    for (size_t e = 0; e < n.edges.size(); ++e) {
        adj[n.edges[e].pos].push_back(static_cast<int>(e));
        adj[n.edges[e].neg].push_back(static_cast<int>(e));
    }
    std::function<Proc(int, int)> build = [&](int v, int pe) -> Proc {
        Proc acc = n.vertices[v];
        for (int e : adj[v]) {
            if (e == pe) continue;
            const auto& ed = n.edges[e];
            bool at_pos = ed.pos == v;
            int other = at_pos ? ed.neg : ed.pos;
            acc = p_cut(ed.x, at_pos ? ed.type : dual_type(ed.type), acc, build(other, e));
        }
        return acc;
    };
    return build(root, -1);
}

// ---------------------------------------------------------------- equality

bool proc_equal(const Proc& a, const Proc& b) {
    if (a == b) return true;
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        [&](const auto& n) -> bool {
            using N = std::decay_t<decltype(n)>;
            const N& m = std::get<N>(b->node);
            if constexpr (std::is_same_v<N, Call>) {
                return n.name == m.name && n.args == m.args;
            } else if constexpr (std::is_same_v<N, Fail> || std::is_same_v<N, Close> || std::is_same_v<N, Nil>) {
                return n.x == m.x;
            } else if constexpr (std::is_same_v<N, Wait>) {
                return n.x == m.x && proc_equal(n.p, m.p);
            } else if constexpr (std::is_same_v<N, Select>) {
                return n.x == m.x && n.label == m.label && proc_equal(n.p, m.p);
            } else if constexpr (std::is_same_v<N, Case>) {
                return n.x == m.x && proc_equal(n.p, m.p) && proc_equal(n.q, m.q);
            } else if constexpr (std::is_same_v<N, Join>) {
                return n.x == m.x && n.y == m.y && proc_equal(n.p, m.p);
            } else if constexpr (std::is_same_v<N, Cut>) {
                return n.x == m.x && type_equal(n.type, m.type) && proc_equal(n.p, m.p) && proc_equal(n.q, m.q);
            } else {
                return n.x == m.x && n.y == m.y && proc_equal(n.p, m.p) && proc_equal(n.q, m.q);
            }
        },
        a->node);
}

// ---------------------------------------------------------------- canonical forms

namespace {

using Env = std::map<Chan, std::string>;

struct Canon {
    bool nests;
    bool sort_pools;

    struct Out {
        Proc term;
        std::string key;
    };

    static std::string tok(const Env& env, const Chan& c) {
        auto it = env.find(c);
        return it != env.end() ? it->second : "f" + std::to_string(c.id);
    }

    static std::string bind_tok(int d) { return "b" + std::to_string(d); }

    Out go(const Proc& p, const Env& env, int d) const {
        if (as<Cut>(p)) return nests ? nest(p, env, d) : plain_cut(p, env, d);
        if (as<Cons>(p)) return pool(p, env, d);
        return std::visit(
            [&](const auto& n) -> Out {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Call>) {
                    std::string k = "A" + n.name + "(";
                    for (auto& a : n.args) k += tok(env, a) + ",";
                    return {p, k + ")"};
                } else if constexpr (std::is_same_v<N, Fail>) {
                    return {p, "F" + tok(env, n.x)};
                } else if constexpr (std::is_same_v<N, Close>) {
                    return {p, "C" + tok(env, n.x)};
                } else if constexpr (std::is_same_v<N, Nil>) {
                    return {p, "N" + tok(env, n.x)};
                } else if constexpr (std::is_same_v<N, Wait>) {
                    auto r = go(n.p, env, d);
                    return {make_proc(Wait{n.x, r.term}, p->span), "W" + tok(env, n.x) + ";" + r.key};
                } else if constexpr (std::is_same_v<N, Select>) {
                    auto r = go(n.p, env, d);
                    return {make_proc(Select{n.x, n.label, r.term}, p->span),
                            std::string(n.label == Label::In1 ? "L" : "R") + tok(env, n.x) + ";" + r.key};
                } else if constexpr (std::is_same_v<N, Case>) {
                    auto a = go(n.p, env, d), b = go(n.q, env, d);
                    return {make_proc(Case{n.x, a.term, b.term}, p->span),
                            "K" + tok(env, n.x) + "{" + a.key + "|" + b.key + "}"};
                } else if constexpr (std::is_same_v<N, Join>) {
                    Env e2 = env;
                    e2[n.y] = bind_tok(d);
                    auto a = go(n.p, e2, d + 1);
                    return {make_proc(Join{n.x, n.y, a.term}, p->span), "J" + tok(env, n.x) + ";" + a.key};
                } else if constexpr (std::is_same_v<N, Fork> || std::is_same_v<N, Server>) {
                    Env e2 = env;
                    e2[n.y] = bind_tok(d);
                    auto a = go(n.p, e2, d + 1);
                    auto b = go(n.q, env, d);
                    const char* tag = std::is_same_v<N, Fork> ? "S" : "V";
                    return {make_proc(N{n.x, n.y, a.term, b.term}, p->span),
                            tag + tok(env, n.x) + "{" + a.key + "}" + b.key};
                } else {
                    return {p, "?"};
                }
            },
            p->node);
    }

    Out plain_cut(const Proc& p, const Env& env, int d) const {
        auto c = as<Cut>(p);
        Env e2 = env;
        e2[c->x] = bind_tok(d);
        auto a = go(c->p, e2, d + 1), b = go(c->q, e2, d + 1);
        return {make_proc(Cut{c->x, c->type, a.term, b.term}, p->span),
                "X" + type_key(c->type) + "{" + a.key + "|" + b.key + "}"};
    }

    Out pool(const Proc& p, const Env& env, int d) const {
        struct Atom {
            Chan x, y;
            Out body;
            std::string key;
            SourceSpan span;
        };
        std::vector<Atom> atoms;
        Proc cur = p;
        while (auto c = as<Cons>(cur)) {
            Env e2 = env;
            e2[c->y] = bind_tok(d);
            auto b = go(c->p, e2, d + 1);
            std::string k = "Q" + tok(env, c->x) + "{" + b.key + "}";
            atoms.push_back(Atom{c->x, c->y, b, k, cur->span});
            cur = c->q;
        }
        if (sort_pools)
            std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.key < b.key; });
        auto tail = go(cur, env, d);
        Proc acc = tail.term;
        for (auto it = atoms.rbegin(); it != atoms.rend(); ++it)
            acc = make_proc(Cons{it->x, it->y, it->body.term, acc}, it->span);
        std::string key = "P[";
        for (auto& a : atoms) key += a.key + ",";
        return {acc, key + "]" + tail.key};
    }

    // Cut nests are canonized as unordered trees whose vertices are the
    // non-cut leaves and whose edges are the cut channels.
    Out nest(const Proc& p, const Env& env, int d) const {
        Nest n = flatten_nest(p);
        size_t nv = n.vertices.size();
        std::vector<std::vector<int>> adj(nv);
        for (size_t e = 0; e < n.edges.size(); ++e) {
            adj[n.edges[e].pos].push_back(static_cast<int>(e));
            adj[n.edges[e].neg].push_back(static_cast<int>(e));
        }
        std::string ptok = "n" + std::to_string(d) + "p";
        auto ctok = [&](size_t i) { return "n" + std::to_string(d) + "c" + std::to_string(i); };

        struct Rooted {
            std::string key;
            Proc vertex;
            std::vector<int> order;  // child edges
        };
        std::map<std::pair<int, int>, Rooted> memo;

        std::function<const Rooted&(int, int)> solve = [&](int v, int pe) -> const Rooted& {
            auto mk = std::make_pair(v, pe);
            if (auto it = memo.find(mk); it != memo.end()) return it->second;
            struct Child {
                int edge;
                std::string str;
            };
            std::vector<Child> kids;
            for (int e : adj[v]) {
                if (e == pe) continue;
                const auto& ed = n.edges[e];
                bool at_pos = ed.pos == v;
                int other = at_pos ? ed.neg : ed.pos;
                Type tv = at_pos ? ed.type : dual_type(ed.type);
                kids.push_back({e, type_key(tv) + ":" + solve(other, e).key});
            }
            std::stable_sort(kids.begin(), kids.end(), [](const Child& a, const Child& b) { return a.str < b.str; });

            // permutations within groups of equal child strings
            std::vector<std::pair<size_t, size_t>> groups;
            for (size_t i = 0; i < kids.size();) {
                size_t j = i;
                while (j < kids.size() && kids[j].str == kids[i].str) ++j;
                groups.push_back({i, j});
                i = j;
            }
            auto eval = [&](const std::vector<Child>& order) {
                Env e2 = env;
                if (pe >= 0) e2[n.edges[pe].x] = ptok;
                for (size_t i = 0; i < order.size(); ++i) e2[n.edges[order[i].edge].x] = ctok(i);
                return go(n.vertices[v], e2, d + 1);
            };
            std::optional<Out> best;
            std::vector<Child> best_order;
            long budget = 720;
            std::function<void(size_t, std::vector<Child>&)> enumerate = [&](size_t g, std::vector<Child>& cur) {
                if (budget <= 0) return;
                if (g == groups.size()) {
                    --budget;
                    auto r = eval(cur);
                    if (!best || r.key < best->key) {
                        best = r;
                        best_order = cur;
                    }
                    return;
                }
                auto [lo, hi] = groups[g];
                if (hi - lo == 1) {
                    enumerate(g + 1, cur);
                    return;
                }
                std::vector<size_t> idx(hi - lo);
                for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
                std::vector<Child> orig(cur.begin() + lo, cur.begin() + hi);
                do {
                    for (size_t i = 0; i < idx.size(); ++i) cur[lo + i] = orig[idx[i]];
                    enumerate(g + 1, cur);
                } while (budget > 0 && std::next_permutation(idx.begin(), idx.end()));
                std::copy(orig.begin(), orig.end(), cur.begin() + lo);
            };
            std::vector<Child> cur = kids;
            enumerate(0, cur);

            Rooted r;
            r.key = "<" + best->key + "{";
            for (auto& k : best_order) {
                r.key += k.str + ",";
                r.order.push_back(k.edge);
            }
            r.key += "}>";
            r.vertex = best->term;
            return memo.emplace(mk, std::move(r)).first->second;
        };

        int root = 0;
        std::string best;
        for (size_t v = 0; v < nv; ++v) {
            const auto& r = solve(static_cast<int>(v), -1);
            if (v == 0 || r.key < best) {
                best = r.key;
                root = static_cast<int>(v);
            }
        }

        std::function<Proc(int, int)> build = [&](int v, int pe) -> Proc {
            const Rooted& r = solve(v, pe);
            Proc acc = r.vertex;
            for (int e : r.order) {
                const auto& ed = n.edges[e];
                bool at_pos = ed.pos == v;
                int other = at_pos ? ed.neg : ed.pos;
                acc = p_cut(ed.x, at_pos ? ed.type : dual_type(ed.type), acc, build(other, e));
            }
            return acc;
        };
        return {build(root, -1), "T" + best};
    }
};

// Renumbers bound channels in traversal order.
struct Renumber {
    std::uint64_t next;

    Chan bind(const Chan& y, std::map<Chan, Chan>& m) {
        Chan y2{y.name, next++};
        m[y] = y2;
        return y2;
    }
    static Chan look(const std::map<Chan, Chan>& m, const Chan& c) {
        auto it = m.find(c);
        return it == m.end() ? c : it->second;
    }

    Proc go(const Proc& p, std::map<Chan, Chan> m) {
        return std::visit(
            [&](const auto& n) -> Proc {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Call>) {
                    std::vector<Chan> args;
                    for (auto& a : n.args) args.push_back(look(m, a));
                    return make_proc(Call{n.name, args}, p->span);
                } else if constexpr (std::is_same_v<N, Fail> || std::is_same_v<N, Close> || std::is_same_v<N, Nil>) {
                    return make_proc(N{look(m, n.x)}, p->span);
                } else if constexpr (std::is_same_v<N, Wait>) {
                    return make_proc(Wait{look(m, n.x), go(n.p, m)}, p->span);
                } else if constexpr (std::is_same_v<N, Select>) {
                    return make_proc(Select{look(m, n.x), n.label, go(n.p, m)}, p->span);
                } else if constexpr (std::is_same_v<N, Case>) {
                    auto a = go(n.p, m);
                    return make_proc(Case{look(m, n.x), a, go(n.q, m)}, p->span);
                } else if constexpr (std::is_same_v<N, Join>) {
                    auto m2 = m;
                    auto y = bind(n.y, m2);
                    return make_proc(Join{look(m, n.x), y, go(n.p, m2)}, p->span);
                } else if constexpr (std::is_same_v<N, Cut>) {
                    auto m2 = m;
                    auto x = bind(n.x, m2);
                    auto a = go(n.p, m2);
                    return make_proc(Cut{x, n.type, a, go(n.q, m2)}, p->span);
                } else {
                    auto m2 = m;
                    auto y = bind(n.y, m2);
                    auto a = go(n.p, m2);
                    return make_proc(N{look(m, n.x), y, a, go(n.q, m)}, p->span);
                }
            },
            p->node);
    }
};

}  // namespace

Canonical canonicalize(const Proc& p, bool sort_pools) {
    auto out = Canon{true, sort_pools}.go(p, {}, 0);
    std::uint64_t base = std::uint64_t(1) << 40;
    for (auto& c : free_names(p)) base = std::max(base, c.id + 1);
    Renumber r{base};
    return {r.go(out.term, {}), out.key};
}

Proc canonical_form(const Proc& p, bool sort_pools) { return canonicalize(p, sort_pools).term; }

std::string alpha_key(const Proc& p) { return Canon{false, false}.go(p, {}, 0).key; }

bool alpha_equal(const Proc& a, const Proc& b, const std::map<Chan, Chan>& corr) {
    Proc a2 = corr.empty() ? a : rename(a, corr);
    return alpha_key(a2) == alpha_key(b);
}

bool alpha_equal(const Program& a, const Program& b) {
    auto def_eq = [](const Definition& x, const Definition& y) {
        if (x.name != y.name || x.params.size() != y.params.size()) return false;
        std::map<Chan, Chan> corr;
        for (size_t i = 0; i < x.params.size(); ++i) {
            if (!type_equal(x.params[i].second, y.params[i].second)) return false;
            corr[x.params[i].first] = y.params[i].first;
        }
        return alpha_equal(x.body, y.body, corr);
    };
    if (a.defs.size() != b.defs.size()) return false;
    for (auto& [name, d] : a.defs) {
        const Definition* e = b.find(name);
        if (!e || !def_eq(d, *e)) return false;
    }
    if (a.main.has_value() != b.main.has_value()) return false;
    return !a.main || def_eq(*a.main, *b.main);
}

}  // namespace csll
