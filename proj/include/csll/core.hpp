#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace csll {

struct SourceSpan {
    std::string file;
    int line = 0;
    int column = 0;
    int length = 0;
};

// Channel identity is the id; the name is only used for printing.
struct ChannelName {
    std::string name;
    std::uint64_t id = 0;

    friend bool operator==(const ChannelName& a, const ChannelName& b) { return a.id == b.id; }
    friend auto operator<=>(const ChannelName& a, const ChannelName& b) { return a.id <=> b.id; }
};
using Chan = ChannelName;

Chan fresh_channel(const std::string& name);
inline Chan refresh(const Chan& c) { return fresh_channel(c.name); }

// ---------------------------------------------------------------- types

enum class TypeKind { Bot, One, Top, Zero, Par, Tensor, With, Plus, Server, Client };

struct SessionType;
using Type = std::shared_ptr<const SessionType>;

struct SessionType {
    TypeKind kind;
    Type left;
    Type right;
};

Type make_type(TypeKind k, Type l = nullptr, Type r = nullptr);
Type t_bot();
Type t_one();
Type t_top();
Type t_zero();
Type t_par(Type a, Type b);
Type t_tensor(Type a, Type b);
Type t_with(Type a, Type b);
Type t_plus(Type a, Type b);
Type t_server(Type a);
Type t_client(Type a);

bool type_equal(const Type& a, const Type& b);
Type dual_type(const Type& t);
int type_depth(const Type& t);
bool is_positive(const Type& t);
bool is_binary(TypeKind k);
bool is_unary(TypeKind k);
// prefix spelling, e.g. "srvbot"; also usable as a map key
std::string type_key(const Type& t);

// ---------------------------------------------------------------- processes

enum class Label { In1, In2 };

struct Process;
using Proc = std::shared_ptr<const Process>;

struct Call { std::string name; std::vector<Chan> args; };
struct Fail { Chan x; };
struct Wait { Chan x; Proc p; };
struct Close { Chan x; };
struct Fork { Chan x, y; Proc p, q; };    // y bound in p
struct Join { Chan x, y; Proc p; };       // y bound in p
struct Select { Chan x; Label label; Proc p; };
struct Case { Chan x; Proc p, q; };
struct Server { Chan x, y; Proc p, q; };  // y bound in p, q is the idle branch
struct Cons { Chan x, y; Proc p, q; };    // client x(y){p}; q
struct Nil { Chan x; };
struct Cut { Chan x; Type type; Proc p, q; };  // p sees x : type, q sees the dual

using ProcNode = std::variant<Call, Fail, Wait, Close, Fork, Join, Select, Case, Server, Cons, Nil, Cut>;

struct Process {
    ProcNode node;
    SourceSpan span;
};

Proc make_proc(ProcNode n, SourceSpan span = {});
Proc p_call(std::string name, std::vector<Chan> args);
Proc p_fail(Chan x);
Proc p_wait(Chan x, Proc p);
Proc p_close(Chan x);
Proc p_fork(Chan x, Chan y, Proc p, Proc q);
Proc p_join(Chan x, Chan y, Proc p);
Proc p_select(Chan x, Label l, Proc p);
Proc p_case(Chan x, Proc p, Proc q);
Proc p_server(Chan x, Chan y, Proc p, Proc q);
Proc p_cons(Chan x, Chan y, Proc p, Proc q);
Proc p_nil(Chan x);
Proc p_cut(Chan x, Type t, Proc p, Proc q);

template <class T>
const T* as(const Proc& p) { return std::get_if<T>(&p->node); }

// subject channel of a guard; nullopt for Call and Cut
std::optional<Chan> subject(const Proc& p);
bool is_guard(const Proc& p);
std::string constructor_name(const Proc& p);

// ---------------------------------------------------------------- programs

struct Definition {
    std::string name;
    std::vector<std::pair<Chan, Type>> params;
    Proc body;
    SourceSpan span;
};

struct Program {
    std::map<std::string, Definition> defs;
    std::optional<Definition> main;

    const Definition* find(const std::string& name) const;
};

struct CoreError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- operations

std::set<Chan> free_names(const Proc& p);
std::set<Chan> bound_names(const Proc& p);

// Capture-avoiding; binders clashing with the map are refreshed.
Proc rename(const Proc& p, const std::map<Chan, Chan>& m);
// Gives every binder a fresh id.
Proc freshen(const Proc& p);
// Body of def with params replaced by args and fresh binders.
Proc instantiate(const Definition& def, const std::vector<Chan>& args);

struct CallDepth {
    bool diverges = false;
    int depth = 0;
};
CallDepth call_depth(const Proc& p, const Program& prog);

// Repeated s-call at unguarded positions (top level and cut positions).
Proc unfold(const Proc& p, const Program& prog);
int count_threads(const Proc& p);
int count_channels(const Proc& p);
bool has_unguarded_call(const Proc& p);

// A maximal nest of cuts seen as a tree: vertices are the non-cut leaves,
// edges are the cut channels.
struct NestEdge {
    Chan x;
    Type type;  // as seen from `pos`
    int pos = 0;
    int neg = 0;
};
struct Nest {
    std::vector<Proc> vertices;
    std::vector<NestEdge> edges;
};
Nest flatten_nest(const Proc& p);
Proc rebuild_nest(const Nest& n, int root = 0);

// Exact structural equality (channel ids, not names).
bool proc_equal(const Proc& a, const Proc& b);

struct Canonical {
    Proc term;
    std::string key;  // alpha-invariant state identity
};
Canonical canonicalize(const Proc& p, bool sort_pools = true);
Proc canonical_form(const Proc& p, bool sort_pools = true);

// Alpha-invariant serialization; free channels print by id.
std::string alpha_key(const Proc& p);
// Alpha-equivalence where the free names of a are matched to those of b by `corr`.
bool alpha_equal(const Proc& a, const Proc& b, const std::map<Chan, Chan>& corr = {});
bool alpha_equal(const Program& a, const Program& b);

// Process nodes in preorder.
void for_each_subterm(const Proc& p, const std::function<void(const Proc&)>& f);

}  // namespace csll
