#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csll/core.hpp"

namespace csll {

enum class RedexKind { Close, Comm, Case, Done, Connect };
std::string to_string(RedexKind k);

struct RedexInfo {
    RedexKind kind = RedexKind::Close;
    Chan channel;
    std::string location;  // "t<i>~t<j>" thread indices in the flattened state
    std::string left, right;  // guard descriptors, positive side first
    int atom = -1;            // index of the connecting client within its pool
};

struct Step {
    RedexInfo redex;
    Proc result;
};

// A state as threads joined by links (the cut channels).
struct Config {
    std::vector<Proc> threads;
    std::vector<NestEdge> links;
};

// Unfolds calls at cut positions and flattens.
Config flatten_det(const Proc& p, const Program& prog);
// Also unfolds pool tails and pushes clients into the side of a cut that uses
// their channel.
Proc expand_full(const Proc& p, const Program& prog);
Config flatten_full(const Proc& p, const Program& prog);

Canonical normalize_det(const Proc& p, const Program& prog);
Canonical normalize_full(const Proc& p, const Program& prog);

// A redex located in a flattened state.
struct Site {
    RedexInfo info;
    int link = -1;
    int pos_thread = -1;  // the thread with the positive guard (close, send, select, done, client)
    int neg_thread = -1;
    Proc redex;   // new x : T { positive | negative } for the two threads
    Proc reduct;  // what the two threads become
};

std::vector<Site> sites(const Config& cfg, bool full);
// The state with the two threads of `s` replaced by `replacement`.
Proc rebuild_with(const Config& cfg, const Site& s, const Proc& replacement);

std::vector<Step> step_all(const Proc& p, const Program& prog);
std::vector<Step> step_det(const Proc& p, const Program& prog);

struct RedexNotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};
RedexInfo find_redex(const Proc& p, const Program& prog);

enum class Scheduler { Det, Random };

struct TraceEntry {
    int step = 0;
    RedexInfo redex;
    Proc state;
    std::uint64_t hash = 0;
};

struct Trace {
    Proc initial;
    std::vector<TraceEntry> entries;
    Proc final_state;
    bool terminated = false;  // no further reduction
    bool truncated = false;   // step budget exhausted
};

std::uint64_t state_hash(const std::string& key);
Trace run(const Proc& p, const Program& prog, Scheduler sched, std::uint64_t seed = 0, int max_steps = 1000);
std::string format_trace_line(const TraceEntry& e);

enum class Tri { Yes, No, Unknown };
std::string to_string(Tri t);

struct GraphEdge {
    RedexInfo redex;
    int target;
};

struct ReductionGraph {
    std::vector<Proc> states;
    std::vector<std::string> keys;
    std::map<std::string, int> index;
    std::vector<std::vector<GraphEdge>> edges;
    std::vector<bool> expanded;
    std::vector<bool> normal_form;
    std::vector<int> depth;
    std::vector<Tri> weakly_terminating;
    bool partial = false;

    int normal_form_count() const;
    std::size_t edge_count() const;
};

ReductionGraph explore(const Proc& p, const Program& prog, int max_states = 100000, int max_depth = 10000);
Tri is_weakly_terminating(int state, const ReductionGraph& g);

enum class FairVerdict { FairlyTerminating, NotFairlyTerminating, Unknown };
std::string to_string(FairVerdict v);

struct FairReport {
    FairVerdict verdict = FairVerdict::Unknown;
    ReductionGraph graph;
    int witness = -1;  // a reachable state that is not weakly terminating
};
FairReport check_fair_termination(const Proc& p, const Program& prog, int max_states = 100000,
                                  int max_depth = 10000);

std::string graph_to_dot(const ReductionGraph& g);
std::string graph_to_json(const ReductionGraph& g);

}  // namespace csll
