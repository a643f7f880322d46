#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulnscout/callgraph.hpp"
#include "vulnscout/context_retriever.hpp"
#include "vulnscout/model_gateway.hpp"
#include "vulnscout/source_index.hpp"

namespace vulnscout {

struct PolicySet {
    std::vector<std::string> cwes; // 2..5, frequency order then first appearance
};

struct Finding {
    std::string function;
    std::optional<Verdict> verdict; // aggregated, CWE consolidated; nullopt = abstention
    std::vector<std::optional<Verdict>> votes;
    std::optional<PolicySet> policy;
    double wall_time = 0.0; // seconds; summary-only, never serialized per line
    int rounds_used = 0;    // max across votes
    bool out_of_scope = false;
    std::string error; // non-empty when the function failed
};

struct ScanConfig {
    std::vector<std::string> entry_points; // names or glob patterns
    int num_paths = 3;
    int votes = 1;
    bool use_policy = false;
    int reasoning_budget = 0;
    std::optional<std::set<std::string>> in_scope_cwes;
    std::uint64_t seed = 0;
    int max_rounds = 8;
    std::size_t context_budget_tokens = 16384;
    int max_output_tokens = 8192;
    double temperature = 0.0;
    double policy_temperature = 0.7;
    int jobs = 1;
};

struct FindingsReport {
    std::vector<Finding> findings; // ordered by function name
    int total_targets = 0;
    int flagged = 0;
    int abstentions = 0;
    int out_of_scope = 0;
    int errors = 0;
    double wall_time_seconds = 0.0;
};

// Four sampled completions with truncated reasoning; candidate CWEs ordered
// by frequency then first appearance, capped at five. nullopt when fewer
// than two distinct candidates emerge (POLICY_DEGENERATE): the caller falls
// back to plain detection.
std::optional<PolicySet> generate_policy(const ContextBundle& bundle, Gateway& gateway,
                                         const GenerationParams& params);

// judge = strictly more than half yes; winning CWE by frequency among yes
// votes, ties broken lexicographically; an exact judge tie resolves benign.
Verdict majority_vote(const std::vector<Verdict>& votes);

// CWE-125 and CWE-787 map to CWE-119, CWE-415 to CWE-416; everything else is
// unchanged. Total and idempotent.
std::string consolidate_cwe(const std::string& cwe);

FindingsReport scan_project(const ProjectIndex& index, const CallGraph& graph,
                            const ScanConfig& config, Gateway& gateway);

// One finding per line, schema-versioned, byte-stable for a fixed seed.
std::string findings_to_jsonl(const FindingsReport& report);
nlohmann::ordered_json report_summary(const FindingsReport& report);
FindingsReport findings_from_jsonl(const std::string& jsonl);

} // namespace vulnscout
