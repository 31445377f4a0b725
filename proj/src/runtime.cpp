#include "csll/runtime.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <random>
#include <sstream>

#include "csll/parser.hpp"
#include "json.hpp"

namespace csll {

std::string to_string(RedexKind k) {
    switch (k) {
        case RedexKind::Close: return "r-close";
        case RedexKind::Comm: return "r-comm";
        case RedexKind::Case: return "r-case";
        case RedexKind::Done: return "r-done";
        case RedexKind::Connect: return "r-connect";
    }
    return "?";
}

std::string to_string(Tri t) {
    switch (t) {
        case Tri::Yes: return "yes";
        case Tri::No: return "no";
        case Tri::Unknown: return "unknown";
    }
    return "?";
}

std::string to_string(FairVerdict v) {
    switch (v) {
        case FairVerdict::FairlyTerminating: return "fairly terminating";
        case FairVerdict::NotFairlyTerminating: return "not fairly terminating";
        case FairVerdict::Unknown: return "unknown";
    }
    return "?";
}

// ---------------------------------------------------------------- flattening

Config flatten_det(const Proc& p, const Program& prog) {
    Nest n = flatten_nest(unfold(p, prog));
    return Config{std::move(n.vertices), std::move(n.edges)};
}

namespace {

constexpr int kMaxTailUnfold = 10000;

struct Pool {
    std::vector<Proc> atoms;  // Cons nodes; only x, y, p are meaningful
    Proc tail;
};

Pool split_pool(const Proc& p) {
    Pool out;
    Proc cur = p;
    while (auto c = as<Cons>(cur)) {
        out.atoms.push_back(cur);
        cur = c->q;
    }
    out.tail = cur;
    return out;
}

Proc prefix(const std::vector<Proc>& atoms, Proc tail) {
    for (auto it = atoms.rbegin(); it != atoms.rend(); ++it) {
        auto c = as<Cons>(*it);
        tail = make_proc(Cons{c->x, c->y, c->p, tail}, (*it)->span);
    }
    return tail;
}

Proc expand(const Proc& p, const Program& prog, int& budget) {
    if (--budget < 0) throw CoreError("unfolding budget exhausted (unguarded recursion in a client pool?)");
    if (auto c = as<Call>(p)) {
        const Definition* d = prog.find(c->name);
        if (!d) throw CoreError("undefined process " + c->name);
        return expand(instantiate(*d, c->args), prog, budget);
    }
    if (auto c = as<Cut>(p)) {
        return make_proc(Cut{c->x, c->type, expand(c->p, prog, budget), expand(c->q, prog, budget)}, p->span);
    }
    if (as<Cons>(p)) {
        Pool pool = split_pool(p);
        Proc tail = expand(pool.tail, prog, budget);
        auto cut = as<Cut>(tail);
        if (!cut) return prefix(pool.atoms, tail);
        // move clients into the side of the cut that uses their channel, innermost first
        std::vector<Proc> left, right, outside;
        auto fl = free_names(cut->p), fr = free_names(cut->q);
        size_t i = pool.atoms.size();
        while (i > 0) {
            auto c = as<Cons>(pool.atoms[i - 1]);
            if (fl.count(c->x)) {
                left.insert(left.begin(), pool.atoms[i - 1]);
            } else if (fr.count(c->x)) {
                right.insert(right.begin(), pool.atoms[i - 1]);
            } else {
                break;
            }
            --i;
        }
        outside.assign(pool.atoms.begin(), pool.atoms.begin() + static_cast<long>(i));
        Proc l = left.empty() ? cut->p : expand(prefix(left, cut->p), prog, budget);
        Proc r = right.empty() ? cut->q : expand(prefix(right, cut->q), prog, budget);
        return prefix(outside, make_proc(Cut{cut->x, cut->type, l, r}, tail->span));
    }
    return p;
}

}  // namespace

Proc expand_full(const Proc& p, const Program& prog) {
    if (call_depth(p, prog).diverges) throw CoreError("unguarded recursion: unfolding does not terminate");
    int budget = kMaxTailUnfold;
    return expand(p, prog, budget);
}

Config flatten_full(const Proc& p, const Program& prog) {
    Nest n = flatten_nest(expand_full(p, prog));
    return Config{std::move(n.vertices), std::move(n.edges)};
}

Canonical normalize_det(const Proc& p, const Program& prog) { return canonicalize(unfold(p, prog), false); }

Canonical normalize_full(const Proc& p, const Program& prog) { return canonicalize(expand_full(p, prog), true); }

// ---------------------------------------------------------------- redexes

namespace {

struct Head {
    Chan subject;
    int atom;  // -1 for the tail
    Proc guard;
};

std::vector<Head> heads(const Proc& t, bool full) {
    std::vector<Head> out;
    Pool pool = split_pool(t);
    if (!full) {
        if (!pool.atoms.empty()) {
            out.push_back({as<Cons>(pool.atoms[0])->x, 0, pool.atoms[0]});
        } else if (auto s = subject(t)) {
            out.push_back({*s, -1, t});
        }
        return out;
    }
    for (size_t i = 0; i < pool.atoms.size(); ++i)
        out.push_back({as<Cons>(pool.atoms[i])->x, static_cast<int>(i), pool.atoms[i]});
    if (auto s = subject(pool.tail)) {
        bool blocked = false;
        if (as<Nil>(pool.tail))
            for (auto& a : pool.atoms)
                if (as<Cons>(a)->x == *s) blocked = true;
        if (!blocked) out.push_back({*s, -1, pool.tail});
    }
    return out;
}

bool is_positive_guard(const Proc& g) {
    return as<Close>(g) || as<Fork>(g) || as<Select>(g) || as<Nil>(g) || as<Cons>(g);
}

std::optional<RedexKind> match(const Proc& pos, const Proc& neg) {
    if (as<Close>(pos) && as<Wait>(neg)) return RedexKind::Close;
    if (as<Fork>(pos) && as<Join>(neg)) return RedexKind::Comm;
    if (as<Select>(pos) && as<Case>(neg)) return RedexKind::Case;
    if (as<Nil>(pos) && as<Server>(neg)) return RedexKind::Done;
    if (as<Cons>(pos) && as<Server>(neg)) return RedexKind::Connect;
    return std::nullopt;
}

std::string descriptor(const Proc& g) { return constructor_name(g) + " " + subject(g)->name; }

}  // namespace

std::vector<Site> sites(const Config& cfg, bool full) {
    std::vector<Site> out;
    std::vector<std::vector<Head>> hs;
    for (auto& t : cfg.threads) hs.push_back(heads(t, full));
    for (size_t li = 0; li < cfg.links.size(); ++li) {
        const NestEdge& e = cfg.links[li];
        for (auto& ha : hs[e.pos]) {
            if (!(ha.subject == e.x)) continue;
            for (auto& hb : hs[e.neg]) {
                if (!(hb.subject == e.x)) continue;
                int pt = e.pos, nt = e.neg;
                const Head* hp = &ha;
                const Head* hn = &hb;
                if (!is_positive_guard(ha.guard)) {
                    std::swap(pt, nt);
                    std::swap(hp, hn);
                }
                auto kind = match(hp->guard, hn->guard);
                if (!kind) continue;
                Type tp = pt == e.pos ? e.type : dual_type(e.type);

                Site s;
                s.info.kind = *kind;
                s.info.channel = e.x;
                s.info.location = "t" + std::to_string(pt) + "~t" + std::to_string(nt);
                s.info.left = descriptor(hp->guard);
                s.info.right = descriptor(hn->guard);
                s.info.atom = hp->atom;
                s.link = static_cast<int>(li);
                s.pos_thread = pt;
                s.neg_thread = nt;
                s.redex = p_cut(e.x, tp, cfg.threads[pt], cfg.threads[nt]);

                Pool ppool = split_pool(cfg.threads[pt]), npool = split_pool(cfg.threads[nt]);
                Proc core;
                std::vector<Proc> wrap;
                switch (*kind) {
                    case RedexKind::Close: core = as<Wait>(hn->guard)->p; break;
                    case RedexKind::Comm: {
                        auto f = as<Fork>(hp->guard);
                        auto j = as<Join>(hn->guard);
                        core = p_cut(f->y, tp->left, f->p, p_cut(e.x, tp->right, f->q, rename(j->p, {{j->y, f->y}})));
                        break;
                    }
                    case RedexKind::Case: {
                        auto sel = as<Select>(hp->guard);
                        auto c = as<Case>(hn->guard);
                        bool first = sel->label == Label::In1;
                        core = p_cut(e.x, first ? tp->left : tp->right, sel->p, first ? c->p : c->q);
                        break;
                    }
                    case RedexKind::Done: core = as<Server>(hn->guard)->q; break;
                    case RedexKind::Connect: {
                        auto cl = as<Cons>(hp->guard);
                        auto sv = as<Server>(hn->guard);
                        std::vector<Proc> rest;
                        for (size_t i = 0; i < ppool.atoms.size(); ++i)
                            if (static_cast<int>(i) != hp->atom) rest.push_back(ppool.atoms[i]);
                        Proc pool_rest = prefix(rest, ppool.tail);
                        core = p_cut(cl->y, tp->left, cl->p, p_cut(e.x, tp, pool_rest, rename(sv->p, {{sv->y, cl->y}})));
                        break;
                    }
                }
                if (hp->atom < 0) wrap.insert(wrap.end(), ppool.atoms.begin(), ppool.atoms.end());
                if (hn->atom < 0) wrap.insert(wrap.end(), npool.atoms.begin(), npool.atoms.end());
                s.reduct = prefix(wrap, core);
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

Proc rebuild_with(const Config& cfg, const Site& s, const Proc& replacement) {
    Nest n;
    int u = s.pos_thread, v = s.neg_thread;
    std::vector<int> remap(cfg.threads.size());
    for (size_t i = 0, k = 0; i < cfg.threads.size(); ++i) {
        if (static_cast<int>(i) == v) continue;
        remap[i] = static_cast<int>(k++);
        n.vertices.push_back(static_cast<int>(i) == u ? replacement : cfg.threads[i]);
    }
    remap[v] = remap[u];
    for (size_t li = 0; li < cfg.links.size(); ++li) {
        if (static_cast<int>(li) == s.link) continue;
        NestEdge e = cfg.links[li];
        e.pos = remap[e.pos];
        e.neg = remap[e.neg];
        n.edges.push_back(e);
    }
    return rebuild_nest(n, 0);
}

std::vector<Step> step_all(const Proc& p, const Program& prog) {
    Config cfg = flatten_full(p, prog);
    std::vector<Step> out;
    for (auto& s : sites(cfg, true)) out.push_back({s.info, normalize_full(rebuild_with(cfg, s, s.reduct), prog).term});
    return out;
}

std::vector<Step> step_det(const Proc& p, const Program& prog) {
    Config cfg = flatten_det(p, prog);
    std::vector<Step> out;
    for (auto& s : sites(cfg, false)) out.push_back({s.info, normalize_det(rebuild_with(cfg, s, s.reduct), prog).term});
    return out;
}

RedexInfo find_redex(const Proc& p, const Program& prog) {
    Config cfg = flatten_det(p, prog);
    // threads outnumber links, so some channel carries two unguarded guards
    std::map<Chan, int> guards;
    for (auto& t : cfg.threads)
        for (auto& h : heads(t, false)) ++guards[h.subject];
    for (auto& e : cfg.links) {
        if (guards[e.x] < 2) continue;
        Config one{cfg.threads, {e}};
        auto found = sites(one, false);
        if (!found.empty()) return found.front().info;
    }
    throw RedexNotFound("no redex: the process is in normal form");
}

// ---------------------------------------------------------------- runs

std::uint64_t state_hash(const std::string& key) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string format_trace_line(const TraceEntry& e) {
    std::ostringstream os;
    os << e.step << ", " << to_string(e.redex.kind) << ", " << e.redex.channel.name << ", " << std::hex
       << e.hash;
    return os.str();
}

Trace run(const Proc& p, const Program& prog, Scheduler sched, std::uint64_t seed, int max_steps) {
    Trace tr;
    std::mt19937_64 rng(seed);
    bool det = sched == Scheduler::Det;
    Proc state = det ? normalize_det(p, prog).term : normalize_full(p, prog).term;
    tr.initial = state;
    for (int step = 1;; ++step) {
        Step chosen;
        if (det) {
            Config cfg = flatten_det(state, prog);
            auto ss = sites(cfg, false);
            if (ss.empty()) {
                tr.terminated = true;
                break;
            }
            if (step > max_steps) {
                tr.truncated = true;
                break;
            }
            chosen = {ss.front().info, rebuild_with(cfg, ss.front(), ss.front().reduct)};
        } else {
            auto ss = step_all(state, prog);
            if (ss.empty()) {
                tr.terminated = true;
                break;
            }
            if (step > max_steps) {
                tr.truncated = true;
                break;
            }
            std::uniform_int_distribution<std::size_t> pick(0, ss.size() - 1);
            chosen = ss[pick(rng)];
        }
        Canonical c = det ? normalize_det(chosen.result, prog) : normalize_full(chosen.result, prog);
        state = c.term;
        tr.entries.push_back({step, chosen.redex, state, state_hash(c.key)});
    }
    tr.final_state = state;
    return tr;
}

// ---------------------------------------------------------------- exploration

int ReductionGraph::normal_form_count() const {
    return static_cast<int>(std::count(normal_form.begin(), normal_form.end(), true));
}

std::size_t ReductionGraph::edge_count() const {
    std::size_t n = 0;
    for (auto& e : edges) n += e.size();
    return n;
}

ReductionGraph explore(const Proc& p, const Program& prog, int max_states, int max_depth) {
    ReductionGraph g;
    auto add = [&](const Canonical& c, int depth) {
        auto it = g.index.find(c.key);
        if (it != g.index.end()) return it->second;
        int id = static_cast<int>(g.states.size());
        g.states.push_back(c.term);
        g.keys.push_back(c.key);
        g.index.emplace(c.key, id);
        g.edges.emplace_back();
        g.expanded.push_back(false);
        g.normal_form.push_back(false);
        g.depth.push_back(depth);
        return id;
    };
    add(normalize_full(p, prog), 0);
    std::deque<int> queue{0};
    while (!queue.empty()) {
        int s = queue.front();
        queue.pop_front();
        if (g.depth[s] >= max_depth) {
            g.partial = true;
            continue;
        }
        auto steps = step_all(g.states[s], prog);
        bool complete = true;
        std::vector<GraphEdge> out;
        for (auto& st : steps) {
            Canonical c = canonicalize(st.result, true);
            if (!g.index.count(c.key) && static_cast<int>(g.states.size()) >= max_states) {
                complete = false;
                continue;
            }
            bool fresh = !g.index.count(c.key);
            int t = add(c, g.depth[s] + 1);
            if (fresh) queue.push_back(t);
            out.push_back({st.redex, t});
        }
        g.edges[s] = std::move(out);
        if (!complete) {
            g.partial = true;
            continue;
        }
        g.expanded[s] = true;
        g.normal_form[s] = steps.empty();
    }

    // yes: a normal form is reachable; no: everything reachable is expanded and none is normal
    size_t n = g.states.size();
    std::vector<std::vector<int>> rev(n);
    for (size_t s = 0; s < n; ++s)
        for (auto& e : g.edges[s]) rev[e.target].push_back(static_cast<int>(s));
    std::vector<bool> reaches_nf(n, false);
    std::deque<int> work;
    for (size_t s = 0; s < n; ++s)
        if (g.normal_form[s]) {
            reaches_nf[s] = true;
            work.push_back(static_cast<int>(s));
        }
    while (!work.empty()) {
        int s = work.front();
        work.pop_front();
        for (int r : rev[s])
            if (!reaches_nf[r]) {
                reaches_nf[r] = true;
                work.push_back(r);
            }
    }
    std::vector<bool> reaches_open(n, false);
    for (size_t s = 0; s < n; ++s)
        if (!g.expanded[s]) {
            reaches_open[s] = true;
            work.push_back(static_cast<int>(s));
        }
    while (!work.empty()) {
        int s = work.front();
        work.pop_front();
        for (int r : rev[s])
            if (!reaches_open[r]) {
                reaches_open[r] = true;
                work.push_back(r);
            }
    }
    g.weakly_terminating.resize(n);
    for (size_t s = 0; s < n; ++s)
        g.weakly_terminating[s] = reaches_nf[s] ? Tri::Yes : reaches_open[s] ? Tri::Unknown : Tri::No;
    return g;
}

Tri is_weakly_terminating(int state, const ReductionGraph& g) { return g.weakly_terminating.at(state); }

FairReport check_fair_termination(const Proc& p, const Program& prog, int max_states, int max_depth) {
    FairReport r;
    r.graph = explore(p, prog, max_states, max_depth);
    bool unknown = false;
    for (size_t s = 0; s < r.graph.states.size(); ++s) {
        Tri t = r.graph.weakly_terminating[s];
        if (t == Tri::No) {
            r.verdict = FairVerdict::NotFairlyTerminating;
            r.witness = static_cast<int>(s);
            return r;
        }
        if (t == Tri::Unknown) unknown = true;
    }
    r.verdict = unknown || r.graph.partial ? FairVerdict::Unknown : FairVerdict::FairlyTerminating;
    return r;
}

// ---------------------------------------------------------------- export

std::string graph_to_dot(const ReductionGraph& g) {
    std::ostringstream os;
    os << "digraph reductions {\n  node [shape=box, fontname=monospace];\n";
    for (size_t s = 0; s < g.states.size(); ++s) {
        std::string label = pretty(g.states[s]);
        std::string esc;
        for (char c : label) {
            if (c == '"' || c == '\\') esc += '\\';
            esc += c;
        }
        os << "  s" << s << " [label=\"" << s << ": " << esc << "\"";
        if (g.normal_form[s]) os << ", peripheries=2";
        if (g.weakly_terminating[s] == Tri::No) os << ", color=red";
        os << "];\n";
    }
    for (size_t s = 0; s < g.states.size(); ++s)
        for (auto& e : g.edges[s])
            os << "  s" << s << " -> s" << e.target << " [label=\"" << to_string(e.redex.kind) << " "
               << e.redex.channel.name << "\"];\n";
    os << "}\n";
    return os.str();
}

std::string graph_to_json(const ReductionGraph& g) {
    nlohmann::json j;
    j["partial"] = g.partial;
    j["states"] = nlohmann::json::array();
    for (size_t s = 0; s < g.states.size(); ++s) {
        nlohmann::json st;
        st["id"] = s;
        st["process"] = pretty(g.states[s]);
        st["normal_form"] = static_cast<bool>(g.normal_form[s]);
        st["weakly_terminating"] = to_string(g.weakly_terminating[s]);
        st["depth"] = g.depth[s];
        j["states"].push_back(st);
    }
    j["edges"] = nlohmann::json::array();
    for (size_t s = 0; s < g.states.size(); ++s)
        for (auto& e : g.edges[s])
            j["edges"].push_back({{"source", s},
                                  {"target", e.target},
                                  {"rule", to_string(e.redex.kind)},
                                  {"channel", e.redex.channel.name}});
    return j.dump(2);
}

}  // namespace csll
