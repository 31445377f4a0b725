#include "csll/logic.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>
#include <tuple>

#include "csll/parser.hpp"
#include "json.hpp"

namespace csll {

// ---------------------------------------------------------------- formulas

Formula f_var(const std::string& x) { return std::make_shared<const MuFormula>(MuFormula{FKind::Var, x, nullptr, nullptr}); }
Formula f_const(FKind k) { return std::make_shared<const MuFormula>(MuFormula{k, "", nullptr, nullptr}); }
Formula f_bin(FKind k, Formula a, Formula b) {
    return std::make_shared<const MuFormula>(MuFormula{k, "", std::move(a), std::move(b)});
}
Formula f_fix(FKind k, const std::string& x, Formula body) {
    return std::make_shared<const MuFormula>(MuFormula{k, x, std::move(body), nullptr});
}

namespace {

bool is_bin(FKind k) { return k == FKind::Par || k == FKind::Tensor || k == FKind::With || k == FKind::Plus; }
bool is_fix(FKind k) { return k == FKind::Nu || k == FKind::Mu; }

bool eq_rec(const Formula& a, const Formula& b, std::vector<std::pair<std::string, std::string>>& env) {
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case FKind::Var: {
            for (auto it = env.rbegin(); it != env.rend(); ++it) {
                bool ha = it->first == a->var, hb = it->second == b->var;
                if (ha || hb) return ha && hb;
            }
            return a->var == b->var;
        }
        case FKind::Nu:
        case FKind::Mu: {
            env.push_back({a->var, b->var});
            bool r = eq_rec(a->left, b->left, env);
            env.pop_back();
            return r;
        }
        case FKind::Par:
        case FKind::Tensor:
        case FKind::With:
        case FKind::Plus: return eq_rec(a->left, b->left, env) && eq_rec(a->right, b->right, env);
        default: return true;
    }
}

const char* op_text(FKind k) {
    switch (k) {
        case FKind::Par: return "(par)";
        case FKind::Tensor: return "(x)";
        case FKind::With: return "(&)";
        case FKind::Plus: return "(+)";
        default: return "?";
    }
}

void free_vars(const Formula& f, std::set<std::string>& bound, std::set<std::string>& out) {
    switch (f->kind) {
        case FKind::Var:
            if (!bound.count(f->var)) out.insert(f->var);
            break;
        case FKind::Nu:
        case FKind::Mu: {
            bool had = bound.count(f->var);
            bound.insert(f->var);
            free_vars(f->left, bound, out);
            if (!had) bound.erase(f->var);
            break;
        }
        case FKind::Par:
        case FKind::Tensor:
        case FKind::With:
        case FKind::Plus:
            free_vars(f->left, bound, out);
            free_vars(f->right, bound, out);
            break;
        default: break;
    }
}

std::string binder_name(int height) {
    static const char* names[] = {"X", "Y", "Z"};
    if (height < 3) return names[height];
    return "X" + std::to_string(height);
}

int coexp_height(const Type& t) {
    if (!t) return -1;
    int h = std::max(coexp_height(t->left), coexp_height(t->right));
    return (t->kind == TypeKind::Server || t->kind == TypeKind::Client) ? h + 1 : h;
}

}  // namespace

bool formula_equal(const Formula& a, const Formula& b) {
    std::vector<std::pair<std::string, std::string>> env;
    return eq_rec(a, b, env);
}

std::string to_string(const Formula& f) {
    switch (f->kind) {
        case FKind::Var: return f->var;
        case FKind::Bot: return "bot";
        case FKind::Top: return "top";
        case FKind::Zero: return "0";
        case FKind::One: return "1";
        case FKind::Nu: return "nu " + f->var + ". " + to_string(f->left);
        case FKind::Mu: return "mu " + f->var + ". " + to_string(f->left);
        default: return "(" + to_string(f->left) + " " + op_text(f->kind) + " " + to_string(f->right) + ")";
    }
}

Formula dual_formula(const Formula& f) {
    switch (f->kind) {
        case FKind::Var: return f;
        case FKind::Bot: return f_const(FKind::One);
        case FKind::One: return f_const(FKind::Bot);
        case FKind::Top: return f_const(FKind::Zero);
        case FKind::Zero: return f_const(FKind::Top);
        case FKind::Par: return f_bin(FKind::Tensor, dual_formula(f->left), dual_formula(f->right));
        case FKind::Tensor: return f_bin(FKind::Par, dual_formula(f->left), dual_formula(f->right));
        case FKind::With: return f_bin(FKind::Plus, dual_formula(f->left), dual_formula(f->right));
        case FKind::Plus: return f_bin(FKind::With, dual_formula(f->left), dual_formula(f->right));
        case FKind::Nu: return f_fix(FKind::Mu, f->var, dual_formula(f->left));
        case FKind::Mu: return f_fix(FKind::Nu, f->var, dual_formula(f->left));
    }
    return f;
}

// `by` is closed in every use, so no capture can happen.
Formula substitute(const Formula& f, const std::string& x, const Formula& by) {
    switch (f->kind) {
        case FKind::Var: return f->var == x ? by : f;
        case FKind::Nu:
        case FKind::Mu:
            if (f->var == x) return f;
            return f_fix(f->kind, f->var, substitute(f->left, x, by));
        case FKind::Par:
        case FKind::Tensor:
        case FKind::With:
        case FKind::Plus: return f_bin(f->kind, substitute(f->left, x, by), substitute(f->right, x, by));
        default: return f;
    }
}

Formula unfold_fixpoint(const Formula& f) {
    if (!is_fix(f->kind)) throw std::invalid_argument("not a fixed point: " + to_string(f));
    return substitute(f->left, f->var, f);
}

bool is_closed(const Formula& f) {
    std::set<std::string> bound, out;
    free_vars(f, bound, out);
    return out.empty();
}

bool subformula_leq(const Formula& phi, const Formula& psi) {
    if (formula_equal(phi, psi)) return true;
    if (is_fix(psi->kind)) return subformula_leq(phi, psi->left);
    if (is_bin(psi->kind)) return subformula_leq(phi, psi->left) || subformula_leq(phi, psi->right);
    return false;
}

Formula encode_type(const Type& t) {
    switch (t->kind) {
        case TypeKind::Bot: return f_const(FKind::Bot);
        case TypeKind::One: return f_const(FKind::One);
        case TypeKind::Top: return f_const(FKind::Top);
        case TypeKind::Zero: return f_const(FKind::Zero);
        case TypeKind::Par: return f_bin(FKind::Par, encode_type(t->left), encode_type(t->right));
        case TypeKind::Tensor: return f_bin(FKind::Tensor, encode_type(t->left), encode_type(t->right));
        case TypeKind::With: return f_bin(FKind::With, encode_type(t->left), encode_type(t->right));
        case TypeKind::Plus: return f_bin(FKind::Plus, encode_type(t->left), encode_type(t->right));
        case TypeKind::Client: {
            auto x = binder_name(coexp_height(t));
            return f_fix(FKind::Mu, x,
                         f_bin(FKind::Plus, f_const(FKind::One), f_bin(FKind::Tensor, encode_type(t->left), f_var(x))));
        }
        case TypeKind::Server: {
            auto x = binder_name(coexp_height(t));
            return f_fix(FKind::Nu, x,
                         f_bin(FKind::With, f_const(FKind::Bot), f_bin(FKind::Par, encode_type(t->left), f_var(x))));
        }
    }
    throw std::logic_error("encode_type");
}

// ---------------------------------------------------------------- addresses

Address dual_address(const Address& a) { return Address{a.atom, !a.dual, a.word}; }

std::string to_string(const Address& a) {
    std::string s = (a.dual ? "~a" : "a") + std::to_string(a.atom);
    if (!a.word.empty()) s += "." + a.word;
    return s;
}

bool is_prefix(const Address& a, const Address& b) {
    return a.atom == b.atom && a.dual == b.dual && b.word.compare(0, a.word.size(), a.word) == 0 &&
           a.word.size() <= b.word.size();
}

bool disjoint(const Address& a, const Address& b) { return !is_prefix(a, b) && !is_prefix(b, a); }

std::string to_string(const Occurrence& o) { return to_string(o.formula) + " @ " + to_string(o.address); }

std::vector<Occurrence> occ_step(const Occurrence& o) {
    const Formula& f = o.formula;
    if (is_bin(f->kind)) return {{f->left, o.address.extend('l')}, {f->right, o.address.extend('r')}};
    if (is_fix(f->kind)) return {{unfold_fixpoint(f), o.address.extend('i')}};
    return {};
}

bool leads_to(const Occurrence& from, const Occurrence& to) {
    if (from.address == to.address && formula_equal(from.formula, to.formula)) return true;
    for (auto& s : occ_step(from))
        if (s.address == to.address && formula_equal(s.formula, to.formula)) return true;
    return false;
}

namespace {
std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    if (b != 0 && a > std::numeric_limits<std::uint64_t>::max() / b) throw std::overflow_error("address stream overflow");
    return a * b;
}
std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    if (a > std::numeric_limits<std::uint64_t>::max() - b) throw std::overflow_error("address stream overflow");
    return a + b;
}
}  // namespace

AddressStream AddressStream::tail() const { return {checked_add(base, step), step}; }
AddressStream AddressStream::even() const { return {base, checked_mul(step, 2)}; }
AddressStream AddressStream::odd() const { return {checked_add(base, step), checked_mul(step, 2)}; }
std::uint64_t AddressStream::at(std::uint64_t i) const { return checked_add(base, checked_mul(i, step)); }

// ---------------------------------------------------------------- encoding

namespace {

std::vector<Occurrence> sorted(std::vector<Occurrence> s) {
    std::sort(s.begin(), s.end(), [](const Occurrence& a, const Occurrence& b) { return a.address < b.address; });
    return s;
}

const std::vector<Occurrence>& edge_sequent(const ProofGraph& g, const ProofEdge& e) {
    return e.back ? e.bud : g.nodes[e.target].sequent;
}

const Occurrence* find_occ(const std::vector<Occurrence>& s, const Address& a) {
    for (auto& o : s)
        if (o.address == a) return &o;
    return nullptr;
}

ProofEdge tree_edge(int target) {
    ProofEdge e;
    e.target = target;
    return e;
}

class Encoder {
public:
    explicit Encoder(const Derivation& d) : d_(d) {}

    ProofGraph run(const AddressAssignment& sigma, AddressStream rho) {
        ProofEdge e = edge(d_.root, sigma, rho);
        if (e.back) throw CoreError("derivation root is a back-edge");
        g_.root = e.target;
        return std::move(g_);
    }

private:
    const Derivation& d_;
    ProofGraph g_;
    std::map<int, AddressAssignment> call_sigma_;
    std::map<int, int> entry_proof_;
    std::map<std::string, Formula> cache_;

    Formula formula(const Type& t) {
        auto k = type_key(t);
        auto it = cache_.find(k);
        if (it != cache_.end()) return it->second;
        return cache_[k] = encode_type(t);
    }

    const TypeContext& ctx(int dn) const { return d_.nodes[dn].judgment.context; }

    std::vector<Occurrence> seq(const TypeContext& g, const AddressAssignment& s, const Chan* skip = nullptr) {
        std::vector<Occurrence> out;
        for (auto& [c, t] : g) {
            if (skip && c == *skip) continue;
            out.push_back({formula(t), s.at(c)});
        }
        return sorted(out);
    }

    int add(const std::string& rule, std::vector<Occurrence> sequent, std::optional<Address> principal, int origin) {
        ProofNode n;
        n.sequent = sorted(std::move(sequent));
        n.rule = rule;
        n.principal = principal;
        n.origin = origin;
        g_.nodes.push_back(std::move(n));
        return static_cast<int>(g_.nodes.size()) - 1;
    }

    void link(int parent, ProofEdge e) { g_.nodes[parent].premises.push_back(std::move(e)); }

    AddressAssignment restrict(const AddressAssignment& s, int dn, const std::map<Chan, Address>& upd) {
        AddressAssignment out;
        for (auto& [c, t] : ctx(dn)) {
            auto it = upd.find(c);
            out[c] = it != upd.end() ? it->second : s.at(c);
        }
        return out;
    }

    ProofEdge edge(int dn, AddressAssignment s, AddressStream r) {
        std::vector<int> chain;
        while (d_.nodes[dn].rule == "call") {
            call_sigma_[dn] = s;
            chain.push_back(dn);
            const DerivEdge& e = d_.nodes[dn].premises.at(0);
            if (e.back) {
                auto it = entry_proof_.find(e.target);
                if (it == entry_proof_.end())
                    throw CoreError("unguarded recursion through " + d_.nodes[dn].def_name + " has no proof");
                ProofEdge pe;
                pe.target = it->second;
                pe.back = true;
                const auto& st = call_sigma_.at(e.target);
                for (auto& [c, t] : e.corr) pe.corr.push_back({s.at(c), st.at(t)});
                std::sort(pe.corr.begin(), pe.corr.end());
                pe.bud = seq(ctx(dn), s);
                return pe;
            }
            dn = e.target;
        }
        ProofEdge pe;
        pe.target = encode(dn, s, r, chain);
        return pe;
    }

    int encode(int dn, const AddressAssignment& s, AddressStream r, const std::vector<int>& chain) {
        const DerivNode& n = d_.nodes[dn];
        const TypeContext& g = n.judgment.context;
        auto mark = [&](int id) {
            for (int c : chain) entry_proof_[c] = id;
            return id;
        };
        const std::string& rule = n.rule;
        if (rule == "cut") {
            const auto& cut = *as<Cut>(n.judgment.process);
            Address a{r.head(), false, ""};
            int id = mark(add("cut", seq(g, s), std::nullopt, dn));
            g_.nodes[id].cut_left = a;
            g_.nodes[id].cut_right = dual_address(a);
            AddressStream rest = r.tail();
            int p0 = n.premises[0].target, p1 = n.premises[1].target;
            link(id, edge(p0, restrict(s, p0, {{cut.x, a}}), rest.even()));
            link(id, edge(p1, restrict(s, p1, {{cut.x, dual_address(a)}}), rest.odd()));
            return id;
        }
        const Chan x = *n.subject;
        const Address al = s.at(x);
        const Formula fx = formula(g.at(x));
        if (rule == "one" || rule == "top") return mark(add(rule, seq(g, s), al, dn));
        if (rule == "bot") {
            int id = mark(add("bot", seq(g, s), al, dn));
            int p = n.premises[0].target;
            link(id, edge(p, restrict(s, p, {}), r));
            return id;
        }
        if (rule == "par") {
            const auto& j = *as<Join>(n.judgment.process);
            int id = mark(add("par", seq(g, s), al, dn));
            int p = n.premises[0].target;
            link(id, edge(p, restrict(s, p, {{j.y, al.extend('l')}, {x, al.extend('r')}}), r));
            return id;
        }
        if (rule == "tensor") {
            const auto& f = *as<Fork>(n.judgment.process);
            int id = mark(add("tensor", seq(g, s), al, dn));
            int p0 = n.premises[0].target, p1 = n.premises[1].target;
            link(id, edge(p0, restrict(s, p0, {{f.y, al.extend('l')}}), r.even()));
            link(id, edge(p1, restrict(s, p1, {{x, al.extend('r')}}), r.odd()));
            return id;
        }
        if (rule == "with") {
            int id = mark(add("with", seq(g, s), al, dn));
            int p0 = n.premises[0].target, p1 = n.premises[1].target;
            link(id, edge(p0, restrict(s, p0, {{x, al.extend('l')}}), r));
            link(id, edge(p1, restrict(s, p1, {{x, al.extend('r')}}), r));
            return id;
        }
        if (rule == "plus") {
            const auto& sel = *as<Select>(n.judgment.process);
            int id = mark(add("plus", seq(g, s), al, dn));
            int p = n.premises[0].target;
            link(id, edge(p, restrict(s, p, {{x, al.extend(sel.label == Label::In1 ? 'l' : 'r')}}), r));
            return id;
        }
        auto rest = seq(g, s, &x);
        auto plus = [&](std::vector<Occurrence> base, const Occurrence& o) {
            base.push_back(o);
            return base;
        };
        Formula unf = unfold_fixpoint(fx);
        Address ai = al.extend('i');
        if (rule == "done") {
            int mu = mark(add("mu", seq(g, s), al, dn));
            int pl = add("plus", plus(rest, {unf, ai}), ai, dn);
            int one = add("one", plus(rest, {unf->left, ai.extend('l')}), ai.extend('l'), dn);
            link(mu, tree_edge(pl));
            link(pl, tree_edge(one));
            return mu;
        }
        if (rule == "client") {
            const auto& cl = *as<Cons>(n.judgment.process);
            Address air = ai.extend('r');
            int mu = mark(add("mu", seq(g, s), al, dn));
            int pl = add("plus", plus(rest, {unf, ai}), ai, dn);
            link(mu, tree_edge(pl));
            // the tensor's context is everything but x, plus the pair at air
            int te = add("tensor", plus(rest, {unf->right, air}), air, dn);
            link(pl, tree_edge(te));
            int p0 = n.premises[0].target, p1 = n.premises[1].target;
            link(te, edge(p0, restrict(s, p0, {{cl.y, air.extend('l')}}), r.even()));
            link(te, edge(p1, restrict(s, p1, {{x, air.extend('r')}}), r.odd()));
            return mu;
        }
        if (rule == "server") {
            const auto& sv = *as<Server>(n.judgment.process);
            Address air = ai.extend('r');
            int nu = mark(add("nu", seq(g, s), al, dn));
            int wi = add("with", plus(rest, {unf, ai}), ai, dn);
            link(nu, tree_edge(wi));
            int bo = add("bot", plus(rest, {unf->left, ai.extend('l')}), ai.extend('l'), dn);
            link(wi, tree_edge(bo));
            int p1 = n.premises[1].target;
            link(bo, edge(p1, restrict(s, p1, {}), r));
            int pa = add("par", plus(rest, {unf->right, air}), air, dn);
            link(wi, tree_edge(pa));
            int p0 = n.premises[0].target;
            link(pa, edge(p0, restrict(s, p0, {{sv.y, air.extend('l')}, {x, air.extend('r')}}), r));
            return nu;
        }
        throw CoreError("no encoding for rule " + rule);
    }
};

}  // namespace

ProofGraph encode_derivation(const Derivation& d, const AddressAssignment& sigma, AddressStream rho) {
    return Encoder(d).run(sigma, rho);
}

std::pair<AddressAssignment, AddressStream> initial_assignment(const TypeContext& g) {
    AddressAssignment s;
    std::uint64_t n = 0;
    for (auto& [c, t] : g) s[c] = Address{n++, false, ""};
    return {s, AddressStream{n, 1}};
}

ProofGraph encode_derivation(const Derivation& d) {
    auto [s, r] = initial_assignment(d.nodes[d.root].judgment.context);
    return encode_derivation(d, s, r);
}

// ---------------------------------------------------------------- validity

std::optional<Formula> min_formula(const std::vector<Formula>& fs) {
    for (auto& m : fs) {
        bool least = true;
        for (auto& f : fs)
            if (!subformula_leq(m, f)) {
                least = false;
                break;
            }
        if (least) return m;
    }
    return std::nullopt;
}

bool is_nu_cycle(const std::vector<Formula>& loop) {
    auto m = min_formula(loop);
    return m && (*m)->kind == FKind::Nu;
}

namespace {

// A thread from occurrence `from` at the source cut point to `to` at the
// target; `label` lists the formulas it reached by moving.
struct TArc {
    int from, to;
    std::vector<int> label;
    auto operator<=>(const TArc&) const = default;
};

struct TGraph {
    int src, tgt;
    std::vector<TArc> arcs;
    std::vector<int> word;
};

std::vector<TArc> tnormalize(std::vector<TArc> a) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

std::vector<int> merge_labels(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}


class FormulaTable {
public:
    int id(const Formula& f) {
        auto k = to_string(f);
        auto it = ids_.find(k);
        if (it != ids_.end()) return it->second;
        fs_.push_back(f);
        return ids_[k] = static_cast<int>(fs_.size()) - 1;
    }
    bool leq(int a, int b) {
        auto k = std::make_pair(a, b);
        auto it = leq_.find(k);
        if (it != leq_.end()) return it->second;
        return leq_[k] = subformula_leq(fs_[a], fs_[b]);
    }
    // Only the minimal elements decide the minimum of any superset.
    std::vector<int> minimal(const std::vector<int>& label) {
        std::vector<int> out;
        for (int a : label) {
            bool keep = true;
            for (int b : label)
                if (b != a && leq(b, a)) keep = false;
            if (keep) out.push_back(a);
        }
        return out;
    }
    bool good(const std::vector<int>& label) {
        if (label.empty()) return false;
        auto it = good_.find(label);
        if (it != good_.end()) return it->second;
        std::vector<Formula> fs;
        for (int i : label) fs.push_back(fs_[i]);
        return good_[label] = is_nu_cycle(fs);
    }

private:
    std::map<std::string, int> ids_;
    std::vector<Formula> fs_;
    std::map<std::vector<int>, bool> good_;
    std::map<std::pair<int, int>, bool> leq_;
};

std::vector<TArc> tcompose(const std::vector<TArc>& a, const std::vector<TArc>& b, FormulaTable& table) {
    std::vector<TArc> out;
    for (auto& x : a)
        for (auto& y : b)
            if (x.to == y.from) out.push_back({x.from, y.to, table.minimal(merge_labels(x.label, y.label))});
    return tnormalize(out);
}

int index_of(const std::vector<Occurrence>& s, const Address& a) {
    for (size_t i = 0; i < s.size(); ++i)
        if (s[i].address == a) return static_cast<int>(i);
    return -1;
}

}  // namespace

ProofValidity proof_validity(const ProofGraph& g, int bound) {
    ProofValidity rep;
    std::set<int> cut_points;
    for (auto& n : g.nodes)
        for (auto& e : n.premises)
            if (e.back) cut_points.insert(e.target);
    if (cut_points.empty()) return rep;

    FormulaTable table;
    std::vector<TGraph> base;
    for (int a : cut_points) {
        struct Live {
            int origin;
            std::vector<int> label;
        };
        struct Item {
            int node;
            std::map<Address, Live> live;
            std::vector<int> word;
        };
        std::vector<Item> stack;
        Item start{a, {}, {}};
        const auto& sa = g.nodes[a].sequent;
        for (size_t i = 0; i < sa.size(); ++i) start.live[sa[i].address] = {static_cast<int>(i), {}};
        stack.push_back(start);
        while (!stack.empty()) {
            Item it = std::move(stack.back());
            stack.pop_back();
            const ProofNode& n = g.nodes[it.node];
            if (it.node != a && cut_points.count(it.node)) {
                std::vector<TArc> arcs;
                for (auto& [cur, l] : it.live) arcs.push_back({l.origin, index_of(n.sequent, cur), l.label});
                base.push_back({a, it.node, tnormalize(arcs), it.word});
                continue;
            }
            it.word.push_back(it.node);
            for (auto& e : n.premises) {
                const auto& ps = edge_sequent(g, e);
                std::map<Address, Live> next;
                for (auto& [cur, l] : it.live) {
                    if (n.principal && *n.principal == cur) {
                        for (auto& o : ps) {
                            if (o.address.atom != cur.atom || o.address.dual != cur.dual ||
                                o.address.word.size() != cur.word.size() + 1 || !is_prefix(cur, o.address))
                                continue;
                            next[o.address] = {l.origin, table.minimal(merge_labels(l.label, {table.id(o.formula)}))};
                        }
                    } else if (find_occ(ps, cur)) {
                        next[cur] = l;
                    }
                }
                if (e.back) {
                    std::vector<TArc> arcs;
                    const auto& ts = g.nodes[e.target].sequent;
                    for (auto& [cur, l] : next)
                        for (auto& [from, to] : e.corr)
                            if (from == cur) arcs.push_back({l.origin, index_of(ts, to), l.label});
                    base.push_back({a, e.target, tnormalize(arcs), it.word});
                    continue;
                }
                stack.push_back(Item{e.target, std::move(next), it.word});
            }
        }
    }

    using Key = std::tuple<int, int, std::vector<TArc>>;
    std::map<Key, TGraph> closure;
    auto insert = [&](TGraph t) {
        Key k{t.src, t.tgt, t.arcs};
        auto it = closure.find(k);
        if (it == closure.end()) {
            closure.emplace(k, std::move(t));
            return true;
        }
        if (t.word.size() < it->second.word.size()) it->second.word = t.word;
        return false;
    };
    for (auto& t : base) insert(t);

    auto scan = [&]() -> const TGraph* {
        rep.thread_nodes.clear();
        std::set<int> on_thread;
        for (auto& [k, t] : closure) {
            if (t.src != t.tgt) continue;
            if (tcompose(t.arcs, t.arcs, table) != t.arcs) continue;
            bool good = false;
            for (auto& arc : t.arcs)
                if (arc.from == arc.to && table.good(arc.label)) good = true;
            if (!good) return &t;
            on_thread.insert(t.word.begin(), t.word.end());
        }
        rep.thread_nodes.assign(on_thread.begin(), on_thread.end());
        return nullptr;
    };

    for (int round = 0;; ++round) {
        if (auto t = scan()) {
            rep.verdict = Verdict::Invalid;
            rep.witness = t->word;
            rep.thread_nodes.clear();
            rep.reason = "cycle through " + std::to_string(t->word.size()) + " proof nodes carries no nu-thread";
            return rep;
        }
        if (round >= bound) break;
        std::vector<TGraph> cur;
        for (auto& [k, t] : closure) cur.push_back(t);
        bool grew = false;
        for (auto& x : cur)
            for (auto& y : cur) {
                if (x.tgt != y.src) continue;
                std::vector<int> w = x.word;
                w.insert(w.end(), y.word.begin(), y.word.end());
                if (insert(TGraph{x.src, y.tgt, tcompose(x.arcs, y.arcs, table), w})) grew = true;
            }
        if (!grew) return rep;
    }
    rep.verdict = Verdict::Inconclusive;
    rep.thread_nodes.clear();
    rep.reason = "cycle closure not saturated after " + std::to_string(bound) + " rounds";
    return rep;
}

// ---------------------------------------------------------------- well-formedness

std::vector<std::string> check_address_hygiene(const ProofGraph& g) {
    std::vector<std::string> out;
    auto check_seq = [&](const std::vector<Occurrence>& s, const std::string& where) {
        for (size_t i = 0; i < s.size(); ++i) {
            if (!is_closed(s[i].formula)) out.push_back(where + ": open formula " + to_string(s[i].formula));
            for (size_t j = i + 1; j < s.size(); ++j)
                if (!disjoint(s[i].address, s[j].address))
                    out.push_back(where + ": " + to_string(s[i].address) + " overlaps " + to_string(s[j].address));
        }
    };
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        const ProofNode& n = g.nodes[i];
        std::string where = "node " + std::to_string(i);
        check_seq(n.sequent, where);
        for (auto& e : n.premises) {
            if (!e.back) continue;
            check_seq(e.bud, where + " bud");
            const auto& ts = g.nodes[e.target].sequent;
            if (e.corr.size() != e.bud.size() || e.corr.size() != ts.size())
                out.push_back(where + ": back-edge correspondence is not a bijection");
            for (auto& [from, to] : e.corr) {
                auto a = find_occ(e.bud, from);
                auto b = find_occ(ts, to);
                if (!a || !b || !formula_equal(a->formula, b->formula))
                    out.push_back(where + ": back-edge maps " + to_string(from) + " to a different formula");
            }
        }
        if (n.rule != "cut") continue;
        if (!n.cut_left || !n.cut_right || !n.cut_left->word.empty() || *n.cut_right != dual_address(*n.cut_left) ||
            n.premises.size() != 2) {
            out.push_back(where + ": cut does not introduce a dual atom pair");
            continue;
        }
        auto l = find_occ(edge_sequent(g, n.premises[0]), *n.cut_left);
        auto r = find_occ(edge_sequent(g, n.premises[1]), *n.cut_right);
        if (!l || !r || !formula_equal(dual_formula(l->formula), r->formula))
            out.push_back(where + ": cut premises do not carry dual formulas at a and ~a");
    }
    return out;
}

// Additive premises share the stream, so atoms are unique along every branch
// rather than across the whole graph.
std::vector<std::string> check_stream_discipline(const ProofGraph& g) {
    std::vector<std::string> out;
    std::set<std::uint64_t> roots;
    for (auto& o : g.nodes[g.root].sequent) roots.insert(o.address.atom);
    std::multiset<std::uint64_t> path;
    std::function<void(int)> go = [&](int id) {
        const ProofNode& n = g.nodes[id];
        bool pushed = false;
        if (n.rule == "cut" && n.cut_left) {
            auto a = n.cut_left->atom;
            if (roots.count(a)) out.push_back("node " + std::to_string(id) + ": cut atom collides with a free atom");
            if (path.count(a)) out.push_back("node " + std::to_string(id) + ": atom a" + std::to_string(a) + " reused");
            path.insert(a);
            pushed = true;
        }
        for (auto& e : n.premises)
            if (!e.back) go(e.target);
        if (pushed) path.erase(path.find(n.cut_left->atom));
    };
    go(g.root);
    return out;
}

// ---------------------------------------------------------------- principal reduction

Reduced principal_reduce(const ProofGraph& g, int cut) {
    const ProofNode& c = g.nodes.at(cut);
    if (c.rule != "cut") throw NotPrincipal("node " + std::to_string(cut) + " is not a cut");
    const ProofEdge& e0 = c.premises.at(0);
    const ProofEdge& e1 = c.premises.at(1);
    if (e0.back || e1.back) throw NotPrincipal("a cut premise is a back-edge");
    int li = e0.target, ri = e1.target;
    Address la = *c.cut_left, ra = *c.cut_right;
    auto negative = [](const std::string& r) { return r == "bot" || r == "par" || r == "with" || r == "nu" || r == "top"; };
    if (negative(g.nodes[li].rule)) {
        std::swap(li, ri);
        std::swap(la, ra);
    }
    const ProofNode& L = g.nodes[li];
    const ProofNode& R = g.nodes[ri];
    if (!L.principal || *L.principal != la || !R.principal || *R.principal != ra)
        throw NotPrincipal("cut on " + to_string(la) + " is not principal on both sides");

    Reduced out;
    out.graph = g;
    ProofGraph& h = out.graph;
    auto new_cut = [&](std::vector<Occurrence> seq, Address l, Address r, ProofEdge p0, ProofEdge p1) {
        ProofNode n;
        n.sequent = sorted(std::move(seq));
        n.rule = "cut";
        n.cut_left = l;
        n.cut_right = r;
        n.premises = {std::move(p0), std::move(p1)};
        n.origin = c.origin;
        h.nodes.push_back(std::move(n));
        return static_cast<int>(h.nodes.size()) - 1;
    };
    auto minus = [](const std::vector<Occurrence>& s, const Address& a) {
        std::vector<Occurrence> r;
        for (auto& o : s)
            if (o.address != a) r.push_back(o);
        return r;
    };

    ProofEdge replacement;
    const std::string pair = L.rule + "/" + R.rule;
    if (pair == "one/bot") {
        replacement = R.premises.at(0);
        out.next_cut = -1;
    } else if (pair == "tensor/par") {
        const ProofEdge& p1 = L.premises.at(0);
        const ProofEdge& p2 = L.premises.at(1);
        const ProofEdge& p3 = R.premises.at(0);
        Address l = la.extend('l'), r = la.extend('r'), dl = ra.extend('l'), dr = ra.extend('r');
        auto s = minus(edge_sequent(g, p2), r);
        for (auto& o : minus(edge_sequent(g, p3), dr)) s.push_back(o);
        int inner = new_cut(s, r, dr, p2, p3);
        int outer = new_cut(c.sequent, l, dl, p1, tree_edge(inner));
        replacement = tree_edge(outer);
        out.next_cut = outer;
    } else if (pair == "plus/with") {
        const ProofEdge& p = L.premises.at(0);
        bool left = find_occ(edge_sequent(g, p), la.extend('l')) != nullptr;
        char d = left ? 'l' : 'r';
        int id = new_cut(c.sequent, la.extend(d), ra.extend(d), p, R.premises.at(left ? 0 : 1));
        replacement = tree_edge(id);
        out.next_cut = id;
    } else if (pair == "mu/nu") {
        int id = new_cut(c.sequent, la.extend('i'), ra.extend('i'), L.premises.at(0), R.premises.at(0));
        replacement = tree_edge(id);
        out.next_cut = id;
    } else {
        throw NotPrincipal("no key case for " + pair);
    }
    out.pair = pair == "one/bot" ? "1/bot" : pair;

    if (cut == g.root) {
        if (replacement.back) throw NotPrincipal("reduct of the root is a back-edge");
        h.root = replacement.target;
        return out;
    }
    for (auto& n : h.nodes)
        for (auto& e : n.premises)
            if (!e.back && e.target == cut) {
                e = replacement;
                return out;
            }
    throw NotPrincipal("cut node " + std::to_string(cut) + " is unreachable");
}

// ---------------------------------------------------------------- matching

namespace {

using AMap = std::map<Address, Address>;

std::optional<Address> rebase(const Address& a, const Address& from, const Address& to) {
    if (!is_prefix(from, a)) return std::nullopt;
    return Address{to.atom, to.dual, to.word + a.word.substr(from.word.size())};
}

}  // namespace

bool proofs_match(const ProofGraph& a, const ProofGraph& b, std::string* why) {
    auto fail = [&](const std::string& m) {
        if (why) *why = m;
        return false;
    };
    struct Ob {
        int n1, n2;
        AMap phi;
    };
    AMap id;
    for (auto& o : a.nodes[a.root].sequent) id[o.address] = o.address;
    std::vector<Ob> work{{a.root, b.root, id}};
    std::set<std::tuple<int, int, std::vector<std::pair<Address, Address>>>> seen;

    auto same_image = [](const std::vector<Occurrence>& s1, const std::vector<Occurrence>& s2, const AMap& m) {
        if (s1.size() != s2.size()) return false;
        for (auto& o : s1) {
            auto it = m.find(o.address);
            if (it == m.end()) return false;
            auto p = find_occ(s2, it->second);
            if (!p || !formula_equal(p->formula, o.formula)) return false;
        }
        return true;
    };

    while (!work.empty()) {
        Ob ob = std::move(work.back());
        work.pop_back();
        std::vector<std::pair<Address, Address>> flat(ob.phi.begin(), ob.phi.end());
        if (!seen.insert({ob.n1, ob.n2, flat}).second) continue;
        const ProofNode& x = a.nodes[ob.n1];
        const ProofNode& y = b.nodes[ob.n2];
        std::string at = "nodes " + std::to_string(ob.n1) + "/" + std::to_string(ob.n2);
        if (x.rule != y.rule) return fail(at + ": rule " + x.rule + " vs " + y.rule);
        if (x.premises.size() != y.premises.size()) return fail(at + ": premise count differs");
        if (!same_image(x.sequent, y.sequent, ob.phi)) return fail(at + ": sequents differ");
        if (x.principal.has_value() != y.principal.has_value()) return fail(at + ": principal differs");
        if (x.principal && ob.phi.at(*x.principal) != *y.principal) return fail(at + ": principal differs");
        for (size_t j = 0; j < x.premises.size(); ++j) {
            const ProofEdge& ex = x.premises[j];
            const ProofEdge& ey = y.premises[j];
            const auto& sx = edge_sequent(a, ex);
            const auto& sy = edge_sequent(b, ey);
            AMap next;
            for (auto& o : sx) {
                std::optional<Address> img;
                auto it = ob.phi.find(o.address);
                if (it != ob.phi.end())
                    img = it->second;
                else if (x.principal && o.address != *x.principal && is_prefix(*x.principal, o.address))
                    img = rebase(o.address, *x.principal, *y.principal);
                else if (x.rule == "cut" && is_prefix(*x.cut_left, o.address))
                    img = rebase(o.address, *x.cut_left, *y.cut_left);
                else if (x.rule == "cut" && is_prefix(*x.cut_right, o.address))
                    img = rebase(o.address, *x.cut_right, *y.cut_right);
                if (!img) return fail(at + ": premise occurrence " + to_string(o.address) + " has no origin");
                next[o.address] = *img;
            }
            if (!same_image(sx, sy, next)) return fail(at + ": premise " + std::to_string(j) + " sequents differ");
            AMap moved;
            for (auto& [p, q] : next) {
                Address pp = p, qq = q;
                if (ex.back)
                    for (auto& [f, t] : ex.corr)
                        if (f == p) pp = t;
                if (ey.back)
                    for (auto& [f, t] : ey.corr)
                        if (f == q) qq = t;
                moved[pp] = qq;
            }
            work.push_back({ex.target, ey.target, std::move(moved)});
        }
    }
    return true;
}

// ---------------------------------------------------------------- correspondence

int expected_principal_steps(RedexKind k) {
    return (k == RedexKind::Done || k == RedexKind::Connect) ? 3 : 1;
}

Correspondence simulate_step(const Config& cfg, const Site& site, const TypeContext& g, const Program& prog) {
    Correspondence rep;
    rep.expected = expected_principal_steps(site.info.kind);
    std::string what = to_string(site.info.kind) + " on " + site.info.channel.name;
    Proc exposed = rebuild_with(cfg, site, site.redex);
    Proc after = rebuild_with(cfg, site, site.reduct);
    Derivation d1, d2;
    try {
        d1 = check(exposed, g, prog);
        d2 = check(after, g, prog);
    } catch (const TypeError& e) {
        rep.message = what + ": does not typecheck: " + e.what();
        return rep;
    }
    int m = -1;
    for (size_t i = 0; i < d1.nodes.size(); ++i)
        if (d1.nodes[i].judgment.process.get() == site.redex.get()) m = static_cast<int>(i);
    if (m < 0) {
        rep.message = what + ": redex not found in the derivation";
        return rep;
    }
    auto [sigma, rho] = initial_assignment(g);
    ProofGraph cur, target;
    try {
        cur = encode_derivation(d1, sigma, rho);
        target = encode_derivation(d2, sigma, rho);
    } catch (const CoreError& e) {
        rep.message = what + ": " + e.what();
        return rep;
    }
    int c = -1;
    for (size_t i = 0; i < cur.nodes.size(); ++i)
        if (cur.nodes[i].rule == "cut" && cur.nodes[i].origin == m) c = static_cast<int>(i);
    std::string why;
    for (int k = 1; k <= 3 && c >= 0; ++k) {
        try {
            Reduced r = principal_reduce(cur, c);
            rep.pairs.push_back(r.pair);
            cur = std::move(r.graph);
            c = r.next_cut;
        } catch (const NotPrincipal& e) {
            why = e.what();
            break;
        }
        if (proofs_match(cur, target, &why)) {
            rep.steps = k;
            break;
        }
    }
    rep.ok = rep.steps == rep.expected;
    if (rep.steps < 0)
        rep.message = what + ": no match after " + std::to_string(rep.pairs.size()) + " principal steps (" + why + ")";
    else if (!rep.ok)
        rep.message = what + ": matched after " + std::to_string(rep.steps) + " steps, expected " +
                      std::to_string(rep.expected);
    else
        rep.message = what + ": matched after " + std::to_string(rep.steps) + " steps";
    return rep;
}

std::vector<Correspondence> simulate_all(const Proc& state, const TypeContext& g, const Program& prog) {
    Config cfg = flatten_det(state, prog);
    std::vector<Correspondence> out;
    for (auto& s : sites(cfg, false)) out.push_back(simulate_step(cfg, s, g, prog));
    return out;
}

// ---------------------------------------------------------------- export

namespace {

std::vector<int> reachable(const ProofGraph& g) {
    std::vector<int> order;
    std::vector<bool> seen(g.nodes.size());
    std::vector<int> stack{g.root};
    while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        if (seen[n]) continue;
        seen[n] = true;
        order.push_back(n);
        auto& ps = g.nodes[n].premises;
        for (auto it = ps.rbegin(); it != ps.rend(); ++it)
            if (!seen[it->target]) stack.push_back(it->target);
    }
    std::sort(order.begin(), order.end());
    return order;
}

std::string rule_symbol(const std::string& r) {
    static const std::map<std::string, std::string> m = {
        {"cut", "cut"}, {"top", "top"}, {"bot", "bot"}, {"one", "1"}, {"par", "(par)"},
        {"tensor", "(x)"}, {"with", "(&)"}, {"plus", "(+)"}, {"nu", "nu"}, {"mu", "mu"}};
    auto it = m.find(r);
    return it == m.end() ? r : it->second;
}

std::string sequent_text(const std::vector<Occurrence>& s) {
    std::string out = "|- ";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += to_string(s[i].formula) + " @ " + to_string(s[i].address);
    }
    return out;
}

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out;
}

}  // namespace

std::string proof_to_json(const ProofGraph& g, const ProofValidity* v) {
    using nlohmann::json;
    json nodes = json::array();
    for (int id : reachable(g)) {
        const ProofNode& n = g.nodes[id];
        json seq = json::array();
        for (auto& o : n.sequent) seq.push_back({{"formula", to_string(o.formula)}, {"address", to_string(o.address)}});
        json prem = json::array();
        json backs = json::array();
        bool back = false;
        for (auto& e : n.premises) {
            prem.push_back(e.target);
            if (!e.back) continue;
            back = true;
            json corr = json::array();
            for (auto& [f, t] : e.corr) corr.push_back({to_string(f), to_string(t)});
            backs.push_back({{"target", e.target}, {"corr", corr}});
        }
        json node = {{"id", id}, {"rule", n.rule}, {"sequent", seq}, {"premises", prem}, {"back", back}};
        if (n.principal) node["principal"] = to_string(*n.principal);
        if (n.cut_left) node["cut"] = {to_string(*n.cut_left), to_string(*n.cut_right)};
        if (back) node["back_edges"] = backs;
        nodes.push_back(node);
    }
    json out = {{"root", g.root}, {"nodes", nodes}};
    if (v) {
        out["validity"] = {{"verdict", to_string(v->verdict)},
                           {"witness", v->witness},
                           {"nu_thread", v->thread_nodes},
                           {"reason", v->reason}};
    }
    return out.dump(2);
}

std::string proof_to_dot(const ProofGraph& g, const ProofValidity* v) {
    std::set<int> hi, bad;
    if (v) {
        hi.insert(v->thread_nodes.begin(), v->thread_nodes.end());
        bad.insert(v->witness.begin(), v->witness.end());
    }
    std::ostringstream out;
    out << "digraph proof {\n  rankdir=BT;\n  node [shape=box, fontname=\"monospace\"];\n";
    for (int id : reachable(g)) {
        const ProofNode& n = g.nodes[id];
        out << "  n" << id << " [label=\"" << id << ": " << dot_escape(rule_symbol(n.rule)) << "\\n"
            << dot_escape(sequent_text(n.sequent)) << "\"";
        if (hi.count(id)) out << ", color=blue, penwidth=2";
        if (bad.count(id)) out << ", color=red, penwidth=2";
        out << "];\n";
    }
    for (int id : reachable(g))
        for (auto& e : g.nodes[id].premises) {
            out << "  n" << e.target << " -> n" << id;
            if (e.back) out << " [style=dashed, constraint=false]";
            out << ";\n";
        }
    out << "}\n";
    return out.str();
}

}  // namespace csll
