#include "vulnscout/callgraph.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <random>

#include "vulnscout/error.hpp"

namespace vulnscout {

namespace {

void sort_dedup(std::vector<CallEdge>& edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

} // namespace

std::vector<std::string> CallGraph::successors(std::string_view node) const {
    std::vector<std::string> out;
    for (const CallEdge& e : edges)
        if (e.caller == node) out.push_back(e.callee);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool CallGraph::has_edge(std::string_view caller, std::string_view callee) const {
    for (const CallEdge& e : edges)
        if (e.caller == caller && e.callee == callee) return true;
    return false;
}

bool CallPath::valid_in(const CallGraph& g) const {
    if (nodes.empty()) return false;
    std::set<std::string> seen;
    for (const std::string& n : nodes)
        if (!seen.insert(n).second) return false;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        if (!g.has_edge(nodes[i], nodes[i + 1])) return false;
    return true;
}

CallGraph build_direct_graph(const ProjectIndex& index) {
    CallGraph g;
    for (const FunctionRecord& f : index.functions) g.nodes.insert(f.qualified_name);
    for (const CallSiteRecord& cs : index.call_sites) {
        if (cs.callee_name == kFunctionPointer) continue;
        for (const FunctionRecord* callee : index.by_name(cs.callee_name))
            g.edges.push_back({cs.caller, callee->qualified_name, EdgeKind::direct});
    }
    sort_dedup(g.edges);
    return g;
}

CallGraph resolve_indirect_edges(const ProjectIndex& index, CallGraph g) {
    std::vector<const FunctionRecord*> taken;
    for (const FunctionRecord& f : index.functions)
        if (f.is_address_taken) taken.push_back(&f);

    for (const CallSiteRecord& cs : index.call_sites) {
        if (cs.callee_name != kFunctionPointer) continue;
        for (const FunctionRecord* cand : taken) {
            if (static_cast<int>(cand->param_sig.size()) != cs.arg_count) continue;
            if (cand->param_sig != cs.arg_sig) continue;
            g.edges.push_back({cs.caller, cand->qualified_name, EdgeKind::indirect});
        }
    }
    sort_dedup(g.edges);
    return g;
}

bool glob_match(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

void set_entry_points(CallGraph& g, const std::vector<std::string>& patterns) {
    std::set<std::string> matched;
    for (const std::string& pat : patterns) {
        if (g.nodes.count(pat)) {
            matched.insert(pat);
            continue;
        }
        bool is_glob = pat.find('*') != std::string::npos || pat.find('?') != std::string::npos;
        if (!is_glob) continue;
        for (const std::string& n : g.nodes)
            if (glob_match(pat, n)) matched.insert(n);
    }
    g.entry_points.assign(matched.begin(), matched.end());
}

std::set<std::string> select_targets(const CallGraph& g) {
    if (g.entry_points.empty()) throw Error(Errc::no_entry_points, "scan config names none");

    std::map<std::string, std::vector<std::string>> adj;
    for (const CallEdge& e : g.edges) adj[e.caller].push_back(e.callee);

    // a node lands in the set only by being the head of a traversed edge, so
    // entry points stay excluded unless some edge re-enters them
    std::set<std::string> reached;
    std::deque<std::string> queue(g.entry_points.begin(), g.entry_points.end());
    std::set<std::string> visited(g.entry_points.begin(), g.entry_points.end());
    while (!queue.empty()) {
        std::string cur = queue.front();
        queue.pop_front();
        auto it = adj.find(cur);
        if (it == adj.end()) continue;
        for (const std::string& next : it->second) {
            reached.insert(next);
            if (visited.insert(next).second) queue.push_back(next);
        }
    }
    return reached;
}

std::vector<CallPath> sample_call_paths(const CallGraph& g, const std::string& entry,
                                        const std::string& target, int k,
                                        std::uint64_t seed) {
    if (k < 1) k = 1;

    // adjacency once, sorted for determinism
    std::map<std::string, std::vector<std::string>> adj;
    for (const std::string& n : g.nodes) adj[n] = {};
    for (const CallEdge& e : g.edges) adj[e.caller].push_back(e.callee);
    for (auto& [n, succ] : adj) {
        std::sort(succ.begin(), succ.end());
        succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
    }

    // reachability check up front
    {
        std::deque<std::string> queue{entry};
        std::set<std::string> visited{entry};
        bool reachable = false;
        while (!queue.empty() && !reachable) {
            std::string cur = queue.front();
            queue.pop_front();
            for (const std::string& next : adj[cur]) {
                if (next == target) reachable = true;
                if (visited.insert(next).second) queue.push_back(next);
            }
        }
        if (!reachable) throw Error(Errc::target_unreachable, entry + " -> " + target);
    }

    std::mt19937_64 rng(seed);
    std::set<std::vector<std::string>> found;
    constexpr int kMaxAttempts = 10000;
    // a long run of walks that add no new path means the distinct paths are
    // exhausted; stop before burning the whole attempt budget
    constexpr int kMaxUnproductive = 256;

    int unproductive = 0;
    for (int attempt = 0; attempt < kMaxAttempts && unproductive < kMaxUnproductive &&
                          static_cast<int>(found.size()) < k;
         ++attempt) {
        std::vector<std::string> path{entry};
        std::set<std::string> on_path{entry};
        while (path.back() != target) {
            std::vector<std::string> options;
            for (const std::string& next : adj[path.back()])
                if (!on_path.count(next)) options.push_back(next);
            if (options.empty()) break; // dead end, restart
            std::size_t pick =
                std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng);
            path.push_back(options[pick]);
            on_path.insert(options[pick]);
        }
        bool is_new = path.back() == target && found.insert(std::move(path)).second;
        unproductive = is_new ? 0 : unproductive + 1;
    }

    std::vector<CallPath> out;
    for (const auto& p : found) out.push_back({p});
    return out;
}

std::string graph_to_dot(const CallGraph& g) {
    std::string dot = "digraph callgraph {\n";
    for (const std::string& n : g.nodes) {
        dot += "  \"" + n + "\"";
        bool entry = std::find(g.entry_points.begin(), g.entry_points.end(), n) !=
                     g.entry_points.end();
        if (entry) dot += " [shape=box]";
        dot += ";\n";
    }
    for (const CallEdge& e : g.edges) {
        dot += "  \"" + e.caller + "\" -> \"" + e.callee + "\"";
        if (e.kind == EdgeKind::indirect) dot += " [style=dashed,label=\"indirect\"]";
        dot += ";\n";
    }
    dot += "}\n";
    return dot;
}

nlohmann::ordered_json graph_to_json(const CallGraph& g) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["nodes"] = std::vector<std::string>(g.nodes.begin(), g.nodes.end());
    j["entry_points"] = g.entry_points;
    auto& edges = j["edges"] = nlohmann::ordered_json::array();
    for (const CallEdge& e : g.edges) {
        edges.push_back({{"caller", e.caller},
                         {"callee", e.callee},
                         {"kind", e.kind == EdgeKind::direct ? "direct" : "indirect"}});
    }
    return j;
}

} // namespace vulnscout
