#include "generators.hpp"

#include <algorithm>
#include <functional>

namespace gen {

using namespace csll;

Type random_type(Rng& r, int depth) {
    if (depth <= 1 || r.chance(0.3)) {
        static const TypeKind leaves[] = {TypeKind::Bot, TypeKind::One, TypeKind::Top, TypeKind::Zero};
        return make_type(leaves[r.uniform(0, 3)]);
    }
    int k = r.uniform(0, 5);
    if (k >= 4) return make_type(k == 4 ? TypeKind::Server : TypeKind::Client, random_type(r, depth - 1));
    static const TypeKind bins[] = {TypeKind::Par, TypeKind::Tensor, TypeKind::With, TypeKind::Plus};
    return make_type(bins[k], random_type(r, depth - 1), random_type(r, depth - 1));
}

Type random_positive(Rng& r, int depth) {
    if (depth <= 1 || r.chance(0.3)) return t_one();
    switch (r.uniform(0, 2)) {
        case 0: return t_tensor(random_positive(r, depth - 1), random_positive(r, depth - 1));
        case 1: return t_plus(random_positive(r, depth - 1), random_positive(r, depth - 1));
        default: return t_client(random_positive(r, depth - 1));
    }
}

namespace {
const TypeKind kLeaves[] = {TypeKind::Bot, TypeKind::One, TypeKind::Top, TypeKind::Zero};
const TypeKind kBinary[] = {TypeKind::Par, TypeKind::Tensor, TypeKind::With, TypeKind::Plus};
const TypeKind kUnary[] = {TypeKind::Server, TypeKind::Client};
}  // namespace

std::uint64_t for_each_type_of_depth(int depth, const std::vector<Type>& below,
                                     const std::function<bool(const Type&)>& f) {
    std::uint64_t n = 0;
    if (depth == 1) {
        for (auto k : kLeaves) {
            ++n;
            if (!f(make_type(k))) return n;
        }
        return n;
    }
    std::vector<Type> top;
    for (auto& t : below)
        if (type_depth(t) == depth - 1) top.push_back(t);
    for (auto k : kUnary)
        for (auto& c : top) {
            ++n;
            if (!f(make_type(k, c))) return n;
        }
    for (auto k : kBinary) {
        for (auto& l : below)
            for (auto& rr : below) {
                if (type_depth(l) != depth - 1 && type_depth(rr) != depth - 1) continue;
                ++n;
                if (!f(make_type(k, l, rr))) return n;
            }
    }
    return n;
}

std::vector<Type> types_of_depth(int depth, const std::vector<Type>& below) {
    std::vector<Type> out;
    for_each_type_of_depth(depth, below, [&](const Type& t) {
        out.push_back(t);
        return true;
    });
    return out;
}

std::vector<Type> all_types_up_to(int depth) {
    std::vector<Type> all;
    for (int d = 1; d <= depth; ++d) {
        auto next = types_of_depth(d, all);
        all.insert(all.end(), next.begin(), next.end());
    }
    return all;
}

TypeContext Generated::context() const { return {{x, t_one()}}; }

namespace {

using Entry = std::pair<Chan, Type>;
using Ctx = std::vector<Entry>;

class Builder {
public:
    explicit Builder(Rng& r) : r_(r) {}

    Program prog;

    // One positive channel plus negatives from bot, par, with, srv.
    Proc gen(Ctx ctx, int fuel) {
        if (fuel <= 0) return finish(std::move(ctx));
        int pi = positive_index(ctx);
        std::vector<int> negs;
        for (size_t i = 0; i < ctx.size(); ++i)
            if (static_cast<int>(i) != pi) negs.push_back(static_cast<int>(i));
        int roll = r_.uniform(0, 9);
        bool only_one = ctx.size() == 1 && ctx[0].second->kind == TypeKind::One;
        if ((roll < 3 || only_one) && fuel >= 2) return cut(std::move(ctx), fuel);
        if (roll < 6 && !negs.empty()) return consume_one(std::move(ctx), negs[r_.uniform(0, static_cast<int>(negs.size()) - 1)], fuel);
        return act_positive(std::move(ctx), pi, fuel);
    }

private:
    Rng& r_;
    int defs_ = 0;

    static int positive_index(const Ctx& ctx) {
        for (size_t i = 0; i < ctx.size(); ++i)
            if (is_positive(ctx[i].second)) return static_cast<int>(i);
        throw std::logic_error("generator context without a positive channel");
    }

    static Ctx without(const Ctx& ctx, int i) {
        Ctx out = ctx;
        out.erase(out.begin() + i);
        return out;
    }

    std::pair<Ctx, Ctx> split(const Ctx& ctx) {
        Ctx a, b;
        for (auto& e : ctx) (r_.chance(0.5) ? a : b).push_back(e);
        return {a, b};
    }

    Proc cut(Ctx ctx, int fuel) {
        int pi = positive_index(ctx);
        Entry p = ctx[pi];
        auto [na, nb] = split(without(ctx, pi));
        Type t = random_positive(r_, r_.uniform(1, 3));
        Chan z = fresh_channel("z");
        Ctx a = na;
        a.push_back({z, t});
        Ctx b = nb;
        b.push_back(p);
        b.push_back({z, dual_type(t)});
        int fa = r_.uniform(0, fuel - 1);
        Proc pa = gen(a, fa), pb = gen(b, fuel - 1 - fa);
        if (r_.chance(0.5)) return p_cut(z, t, pa, pb);
        return p_cut(z, dual_type(t), pb, pa);
    }

    Proc act_positive(Ctx ctx, int pi, int fuel) {
        auto [c, t] = ctx[pi];
        Ctx rest = without(ctx, pi);
        switch (t->kind) {
            case TypeKind::One:
                if (rest.empty()) return p_close(c);
                return consume_one(ctx, pi == 0 ? 1 : 0, fuel);
            case TypeKind::Tensor: {
                Chan y = fresh_channel("y");
                auto [a, b] = split(rest);
                a.push_back({y, t->left});
                b.push_back({c, t->right});
                int fa = r_.uniform(0, fuel - 1);
                return p_fork(c, y, gen(a, fa), gen(b, fuel - 1 - fa));
            }
            case TypeKind::Plus: {
                bool first = r_.chance(0.5);
                ctx[pi].second = first ? t->left : t->right;
                return p_select(c, first ? Label::In1 : Label::In2, gen(ctx, fuel - 1));
            }
            case TypeKind::Client: {
                if (rest.empty() && r_.chance(0.4)) return p_nil(c);
                Chan y = fresh_channel("y");
                auto [a, b] = split(rest);
                a.push_back({y, t->left});
                b.push_back({c, t});
                int fa = r_.uniform(0, fuel - 1);
                return p_cons(c, y, gen(a, fa), gen(b, fuel - 1 - fa));
            }
            default: throw std::logic_error("not a positive type");
        }
    }

    // One step on a negative channel; servers become recursive definitions.
    Proc consume_one(Ctx ctx, int i, int fuel) {
        auto [c, t] = ctx[i];
        switch (t->kind) {
            case TypeKind::Bot: return p_wait(c, gen(without(ctx, i), fuel - 1));
            case TypeKind::Par: {
                Chan y = fresh_channel("y");
                ctx[i].second = t->right;
                ctx.push_back({y, t->left});
                return p_join(c, y, gen(ctx, fuel - 1));
            }
            case TypeKind::With: {
                Ctx a = ctx, b = ctx;
                a[i].second = t->left;
                b[i].second = t->right;
                return p_case(c, gen(a, (fuel - 1) / 2), gen(b, (fuel - 1) / 2));
            }
            case TypeKind::Server: {
                Ctx keep = without(ctx, i);
                Proc idle = gen(keep, fuel - 1);
                return server_call(c, t, keep, idle);
            }
            default: throw std::logic_error("not a negative type");
        }
    }

    Proc finish(Ctx ctx) {
        int pi = positive_index(ctx);
        for (size_t i = 0; i < ctx.size(); ++i)
            if (static_cast<int>(i) != pi) return consume_one(ctx, static_cast<int>(i), 0);
        auto [c, t] = ctx[pi];
        switch (t->kind) {
            case TypeKind::One: return p_close(c);
            case TypeKind::Tensor: {
                Chan y = fresh_channel("y");
                return p_fork(c, y, finish({{y, t->left}}), finish({{c, t->right}}));
            }
            case TypeKind::Plus: {
                bool first = r_.chance(0.5);
                return p_select(c, first ? Label::In1 : Label::In2, finish({{c, first ? t->left : t->right}}));
            }
            case TypeKind::Client: return p_nil(c);
            default: throw std::logic_error("not a positive type");
        }
    }

    // Consumes every channel of `todo` (all negative) and then continues with `k`,
    // whose free names are exactly `keep`.
    Proc consume_all(Ctx todo, const Ctx& keep, const Proc& k) {
        if (todo.empty()) return k;
        auto [c, t] = todo.front();
        Ctx rest(todo.begin() + 1, todo.end());
        switch (t->kind) {
            case TypeKind::Bot: return p_wait(c, consume_all(rest, keep, k));
            case TypeKind::Par: {
                Chan y = fresh_channel("y");
                rest.push_back({y, t->left});
                rest.push_back({c, t->right});
                return p_join(c, y, consume_all(rest, keep, k));
            }
            case TypeKind::With: {
                Ctx a = rest, b = rest;
                a.push_back({c, t->left});
                b.push_back({c, t->right});
                return p_case(c, consume_all(a, keep, k), consume_all(b, keep, freshen(k)));
            }
            case TypeKind::Server: {
                Ctx outer = rest;
                outer.insert(outer.end(), keep.begin(), keep.end());
                // the idle branch finishes the remaining work, then continues with k
                return server_call(c, t, outer, consume_all(rest, keep, k));
            }
            default: throw std::logic_error("consume_all on a positive type");
        }
    }

    // def Srv_n(s: srv A, others) = server s(y) { consume y; Srv_n(s, others) } idle { idle }
    // and the call Srv_n(c, others).
    Proc server_call(const Chan& c, const Type& t, const Ctx& others, const Proc& idle) {
        std::string name = "Srv" + std::to_string(defs_++);
        Chan s = fresh_channel("s");
        std::map<Chan, Chan> to_param;
        Ctx params;
        std::vector<Chan> param_chans{s}, args{c};
        for (auto& [ch, ty] : others) {
            Chan p = fresh_channel(ch.name);
            to_param[ch] = p;
            params.push_back({p, ty});
            param_chans.push_back(p);
            args.push_back(ch);
        }
        Chan y = fresh_channel("y");
        Proc again = p_call(name, param_chans);
        Ctx keep{{s, t}};
        keep.insert(keep.end(), params.begin(), params.end());
        Proc body = p_server(s, y, consume_all({{y, t->left}}, keep, again), rename(idle, to_param));
        Definition d;
        d.name = name;
        d.params.push_back({s, t});
        for (auto& e : params) d.params.push_back(e);
        d.body = body;
        prog.defs[name] = d;
        return p_call(name, args);
    }
};

}  // namespace

Generated random_program(Rng& r, int fuel) {
    Builder b(r);
    Generated g;
    g.x = fresh_channel("x");
    Proc body = b.gen({{g.x, t_one()}}, fuel);
    g.program = std::move(b.prog);
    Definition m;
    m.name = "main";
    m.params = {{g.x, t_one()}};
    m.body = body;
    g.program.main = m;
    return g;
}

Proc random_process(Rng& r, int depth, std::vector<Chan>& free, const Program& callees) {
    static const char* names[] = {"x", "y", "u"};
    auto pick = [&]() -> Chan {
        if (free.empty() || r.chance(0.2)) free.push_back(fresh_channel(names[r.uniform(0, 2)]));
        return free[r.uniform(0, static_cast<int>(free.size()) - 1)];
    };
    auto bind = [&](const std::function<Proc(const Chan&)>& body) {
        Chan b = fresh_channel(names[r.uniform(0, 2)]);
        free.push_back(b);
        Proc p = body(b);
        free.erase(std::find(free.begin(), free.end(), b));
        return p;
    };
    if (depth <= 0) {
        switch (r.uniform(0, 2)) {
            case 0: return p_close(pick());
            case 1: return p_fail(pick());
            default: return p_nil(pick());
        }
    }
    int k = r.uniform(0, callees.defs.empty() ? 11 : 12);
    switch (k) {
        case 0: return p_close(pick());
        case 1: return p_fail(pick());
        case 2: return p_nil(pick());
        case 3: {
            Chan x = pick();
            return p_wait(x, random_process(r, depth - 1, free, callees));
        }
        case 4: {
            Chan x = pick();
            return bind([&](const Chan& y) { return p_join(x, y, random_process(r, depth - 1, free, callees)); });
        }
        case 5: {
            Chan x = pick();
            Proc q = random_process(r, depth - 1, free, callees);
            return bind([&](const Chan& y) { return p_fork(x, y, random_process(r, depth - 1, free, callees), q); });
        }
        case 6: {
            Chan x = pick();
            return p_select(x, r.chance(0.5) ? Label::In1 : Label::In2, random_process(r, depth - 1, free, callees));
        }
        case 7: {
            Chan x = pick();
            return p_case(x, random_process(r, depth - 1, free, callees), random_process(r, depth - 1, free, callees));
        }
        case 8: {
            Chan x = pick();
            Proc q = random_process(r, depth - 1, free, callees);
            return bind([&](const Chan& y) { return p_server(x, y, random_process(r, depth - 1, free, callees), q); });
        }
        case 9: {
            Chan x = pick();
            Proc q = random_process(r, depth - 1, free, callees);
            return bind([&](const Chan& y) { return p_cons(x, y, random_process(r, depth - 1, free, callees), q); });
        }
        case 10:
        case 11: {
            Type t = random_type(r, 3);
            return bind([&](const Chan& x) {
                return p_cut(x, t, random_process(r, depth - 1, free, callees),
                             random_process(r, depth - 1, free, callees));
            });
        }
        default: {
            auto it = callees.defs.begin();
            std::advance(it, r.uniform(0, static_cast<int>(callees.defs.size()) - 1));
            std::vector<Chan> args;
            for (size_t i = 0; i < it->second.params.size(); ++i) args.push_back(fresh_channel(names[i % 3]));
            free.insert(free.end(), args.begin(), args.end());
            return p_call(it->first, args);
        }
    }
}

}  // namespace gen
