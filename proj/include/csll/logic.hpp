#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csll/core.hpp"
#include "csll/runtime.hpp"
#include "csll/typecheck.hpp"

namespace csll {

// ---------------------------------------------------------------- formulas

enum class FKind { Var, Bot, Top, Zero, One, Par, Tensor, With, Plus, Nu, Mu };

struct MuFormula;
using Formula = std::shared_ptr<const MuFormula>;

struct MuFormula {
    FKind kind;
    std::string var;  // Var, and the binder of Nu/Mu
    Formula left;     // body of Nu/Mu
    Formula right;
};

Formula f_var(const std::string& x);
Formula f_const(FKind k);
Formula f_bin(FKind k, Formula a, Formula b);
Formula f_fix(FKind k, const std::string& x, Formula body);

bool formula_equal(const Formula& a, const Formula& b);  // up to renaming of binders
std::string to_string(const Formula& f);                  // e.g. "mu X. (1 (+) (1 (x) X))"
Formula dual_formula(const Formula& f);
Formula substitute(const Formula& f, const std::string& x, const Formula& by);
// sigma X. phi  ->  phi[sigma X. phi / X]
Formula unfold_fixpoint(const Formula& f);
bool is_closed(const Formula& f);
// phi is a (syntactic) subformula of psi
bool subformula_leq(const Formula& phi, const Formula& psi);

Formula encode_type(const Type& t);

// ---------------------------------------------------------------- addresses

struct Address {
    std::uint64_t atom = 0;
    bool dual = false;
    std::string word;  // over {i, l, r}

    Address extend(char c) const { return Address{atom, dual, word + c}; }
    auto operator<=>(const Address&) const = default;
};
Address dual_address(const Address& a);
std::string to_string(const Address& a);
bool is_prefix(const Address& a, const Address& b);
bool disjoint(const Address& a, const Address& b);

struct Occurrence {
    Formula formula;
    Address address;
};
std::string to_string(const Occurrence& o);
// the immediate successors under the thread relation (reflexivity excluded)
std::vector<Occurrence> occ_step(const Occurrence& o);
bool leads_to(const Occurrence& from, const Occurrence& to);  // reflexive

// Injective stream of atoms realised by arithmetic re-indexing.
struct AddressStream {
    std::uint64_t base = 0;
    std::uint64_t step = 1;

    std::uint64_t head() const { return base; }
    AddressStream tail() const;
    AddressStream even() const;
    AddressStream odd() const;
    std::uint64_t at(std::uint64_t i) const;
};

// ---------------------------------------------------------------- proofs

struct ProofEdge {
    int target = -1;
    bool back = false;
    std::vector<std::pair<Address, Address>> corr;  // back-edges: bud address -> target address
    std::vector<Occurrence> bud;                     // back-edges: the sequent at the bud
};

struct ProofNode {
    std::vector<Occurrence> sequent;
    std::string rule;  // cut top bot one par tensor with plus nu mu
    std::optional<Address> principal;
    std::optional<Address> cut_left, cut_right;
    std::vector<ProofEdge> premises;
    int origin = -1;  // derivation node this rule comes from
};

struct ProofGraph {
    std::vector<ProofNode> nodes;
    int root = 0;
};

using AddressAssignment = std::map<Chan, Address>;

ProofGraph encode_derivation(const Derivation& d, const AddressAssignment& sigma, AddressStream rho);
// Atoms 0..n-1 for the context (in channel order); the stream starts at n.
std::pair<AddressAssignment, AddressStream> initial_assignment(const TypeContext& g);
ProofGraph encode_derivation(const Derivation& d);

struct ProofValidity {
    Verdict verdict = Verdict::Valid;
    std::vector<int> witness;        // proof nodes of an offending cycle
    std::vector<int> thread_nodes;   // nodes on a nu-thread (valid proofs)
    std::string reason;
};
ProofValidity proof_validity(const ProofGraph& g, int bound = 3);

// The minimum of a set of formulas under subformula_leq, if it exists.
std::optional<Formula> min_formula(const std::vector<Formula>& fs);
// Whether repeating `loop` forever gives a nu-thread.
bool is_nu_cycle(const std::vector<Formula>& loop);

// Well-formedness checks used by tests.
std::vector<std::string> check_address_hygiene(const ProofGraph& g);
std::vector<std::string> check_stream_discipline(const ProofGraph& g);

// One principal step at cut node `cut`. Old nodes stay in place so that
// back-edges into them remain meaningful. Returns the graph and the cut
// produced by the step (or -1 when the step removes the cut).
struct Reduced {
    ProofGraph graph;
    int next_cut = -1;
    std::string pair;  // e.g. "mu/nu"
};
struct NotPrincipal : std::runtime_error {
    using std::runtime_error::runtime_error;
};
Reduced principal_reduce(const ProofGraph& g, int cut);

// Whether two proof graphs unfold to the same infinite proof up to renaming of cut atoms.
bool proofs_match(const ProofGraph& a, const ProofGraph& b, std::string* why = nullptr);

struct Correspondence {
    bool ok = false;
    int steps = -1;
    int expected = -1;
    std::vector<std::string> pairs;
    std::string message;
};
int expected_principal_steps(RedexKind k);
Correspondence simulate_step(const Config& cfg, const Site& site, const TypeContext& g, const Program& prog);
// Checks every det step out of `state`.
std::vector<Correspondence> simulate_all(const Proc& state, const TypeContext& g, const Program& prog);

std::string proof_to_json(const ProofGraph& g, const ProofValidity* v = nullptr);
std::string proof_to_dot(const ProofGraph& g, const ProofValidity* v = nullptr);

}  // namespace csll
