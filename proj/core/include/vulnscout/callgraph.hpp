#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulnscout/source_index.hpp"

namespace vulnscout {

enum class EdgeKind { direct, indirect };

struct CallEdge {
    std::string caller;
    std::string callee;
    EdgeKind kind = EdgeKind::direct;

    friend auto operator<=>(const CallEdge&, const CallEdge&) = default;
};

// Immutable once resolve_indirect_edges has run; safe for concurrent readers.
struct CallGraph {
    std::set<std::string> nodes;
    std::vector<CallEdge> edges; // sorted, no duplicate (caller, callee, kind)
    std::vector<std::string> entry_points;

    std::vector<std::string> successors(std::string_view node) const;
    bool has_edge(std::string_view caller, std::string_view callee) const;
};

struct CallPath {
    std::vector<std::string> nodes; // entry first, target last, no repeats

    bool valid_in(const CallGraph& g) const;
    friend auto operator<=>(const CallPath&, const CallPath&) = default;
};

// One DIRECT edge per (caller, resolved callee); a callee name matching
// several definitions contributes an edge to each.
CallGraph build_direct_graph(const ProjectIndex& index);

// Adds INDIRECT edges from every FUNCTION_POINTER call site to each
// address-taken function with matching arity and normalized signature.
CallGraph resolve_indirect_edges(const ProjectIndex& index, CallGraph g);

// Resolves entry point names/glob patterns against graph nodes and stores
// them on the graph. Unmatched patterns are ignored.
void set_entry_points(CallGraph& g, const std::vector<std::string>& patterns);

// Forward-reachable set from all entry points, excluding the entry points
// themselves unless self-reachable. Throws Error(no_entry_points).
std::set<std::string> select_targets(const CallGraph& g);

// Seeded random walk with restart; distinct simple paths, deterministic per
// seed, at most k (fewer when fewer exist). Throws Error(target_unreachable).
std::vector<CallPath> sample_call_paths(const CallGraph& g, const std::string& entry,
                                        const std::string& target, int k,
                                        std::uint64_t seed);

bool glob_match(std::string_view pattern, std::string_view text);

std::string graph_to_dot(const CallGraph& g);
nlohmann::ordered_json graph_to_json(const CallGraph& g);

} // namespace vulnscout
