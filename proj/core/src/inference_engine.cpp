#include "vulnscout/inference_engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "vulnscout/error.hpp"
#include "vulnscout/text.hpp"

namespace vulnscout {

std::optional<PolicySet> generate_policy(const ContextBundle& bundle, Gateway& gateway,
                                         const GenerationParams& params) {
    std::string ctx;
    for (const FunctionRecord& rec : bundle.initial_context) {
        if (!ctx.empty()) ctx += "\n\n";
        ctx += rec.source_text;
    }
    std::string prompt = render_detection_prompt(
        bundle.target.source_text,
        ctx.empty() ? std::nullopt : std::optional<std::string_view>(ctx));
    std::vector<ChatMessage> messages{{Role::user, prompt, std::nullopt, std::nullopt}};

    std::vector<std::string> order;           // first appearance
    std::map<std::string, int> frequency;

    constexpr int kSamples = 4;
    for (int i = 0; i < kSamples; ++i) {
        GenerationParams p = params;
        p.seed = fnv1a_mix(params.seed.value_or(0), "policy:" + std::to_string(i));
        std::string text;
        try {
            text = gateway.truncated_complete(messages, p,
                                              bundle.target.qualified_name + "#policy");
        } catch (const Error& e) {
            if (e.code() == Errc::forced_conclusion_failed) continue;
            throw;
        }
        for (const std::string& cwe : parse_policy_candidates(text)) {
            if (!frequency.count(cwe)) order.push_back(cwe);
            ++frequency[cwe];
        }
    }

    if (order.size() < 2) return std::nullopt; // POLICY_DEGENERATE

    std::stable_sort(order.begin(), order.end(), [&](const std::string& a,
                                                     const std::string& b) {
        return frequency[a] > frequency[b];
    });
    if (order.size() > 5) order.resize(5);
    return PolicySet{order};
}

Verdict majority_vote(const std::vector<Verdict>& votes) {
    Verdict out;
    if (votes.empty()) return out;

    std::size_t yes = 0;
    for (const Verdict& v : votes)
        if (v.judge) ++yes;
    if (yes * 2 <= votes.size()) return out; // ties resolve to benign

    out.judge = true;
    std::map<std::string, int> counts;
    for (const Verdict& v : votes)
        if (v.judge && v.cwe) ++counts[*v.cwe];
    int best = 0;
    std::string winner;
    for (const auto& [cwe, n] : counts) { // map order = lexicographic tiebreak
        if (n > best) {
            best = n;
            winner = cwe;
        }
    }
    if (!winner.empty()) out.cwe = winner;
    return out;
}

std::string consolidate_cwe(const std::string& cwe) {
    if (cwe == "CWE-125" || cwe == "CWE-787") return "CWE-119";
    if (cwe == "CWE-415") return "CWE-416";
    return cwe;
}

namespace {

std::uint64_t vote_seed(const ScanConfig& config, const std::string& function, int vote) {
    std::uint64_t h = fnv1a_mix(config.seed ^ 0x9e3779b97f4a7c15ULL, function);
    return fnv1a_mix(h, "vote:" + std::to_string(vote));
}

Finding analyze_target(const ProjectIndex& index, const CallGraph& graph,
                       const ScanConfig& config, Gateway& gateway,
                       const std::string& target) {
    Finding finding;
    finding.function = target;
    auto started = std::chrono::steady_clock::now();

    const FunctionRecord* rec = index.by_qualified_name(target);
    if (!rec) {
        finding.error = "function missing from index";
        return finding;
    }

    std::vector<CallPath> paths;
    for (const std::string& entry : graph.entry_points) {
        try {
            std::uint64_t seed = fnv1a_mix(vote_seed(config, target, -1), entry);
            auto sampled = sample_call_paths(graph, entry, target, config.num_paths, seed);
            paths.insert(paths.end(), sampled.begin(), sampled.end());
        } catch (const Error& e) {
            if (e.code() != Errc::target_unreachable) throw;
        }
    }

    ContextBundle bundle =
        assemble_initial_context(*rec, paths, index, config.context_budget_tokens);

    std::vector<std::string> policy;
    if (config.use_policy) {
        GenerationParams pp;
        pp.max_output_tokens = config.max_output_tokens;
        pp.reasoning_budget_tokens = config.reasoning_budget;
        pp.temperature = config.policy_temperature;
        pp.seed = vote_seed(config, target, -2);
        if (auto ps = generate_policy(bundle, gateway, pp)) {
            policy = ps->cwes;
            finding.policy = *ps;
        }
    }

    for (int v = 0; v < config.votes; ++v) {
        GenerationParams params;
        params.max_output_tokens = config.max_output_tokens;
        params.reasoning_budget_tokens = config.reasoning_budget;
        params.temperature = config.votes > 1 ? config.policy_temperature : config.temperature;
        params.seed = vote_seed(config, target, v);

        RetrievalBudget budget;
        budget.max_rounds = config.max_rounds;
        ToolLoopResult round = run_tool_loop(bundle, index, gateway, params, budget, policy,
                                             target + "#" + std::to_string(v));
        finding.votes.push_back(round.verdict);
        finding.rounds_used = std::max(finding.rounds_used, round.budget.rounds_used);
    }

    // abstentions aggregate as benign votes, tallied separately
    std::vector<Verdict> effective;
    for (const auto& v : finding.votes) effective.push_back(v ? *v : Verdict{});
    Verdict aggregated = majority_vote(effective);
    if (aggregated.judge && aggregated.cwe) aggregated.cwe = consolidate_cwe(*aggregated.cwe);

    bool all_abstained = std::none_of(finding.votes.begin(), finding.votes.end(),
                                      [](const auto& v) { return v.has_value(); });
    if (all_abstained) {
        finding.verdict = std::nullopt;
    } else if (aggregated.judge && aggregated.cwe && config.in_scope_cwes &&
               !config.in_scope_cwes->count(*aggregated.cwe)) {
        finding.out_of_scope = true;
        finding.verdict = std::nullopt; // downgraded to an abstention
    } else {
        finding.verdict = aggregated;
    }

    finding.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return finding;
}

} // namespace

FindingsReport scan_project(const ProjectIndex& index, const CallGraph& graph,
                            const ScanConfig& config, Gateway& gateway) {
    auto started = std::chrono::steady_clock::now();
    std::set<std::string> target_set = select_targets(graph); // throws NO_ENTRY_POINTS
    std::vector<std::string> targets(target_set.begin(), target_set.end());

    FindingsReport report;
    report.total_targets = static_cast<int>(targets.size());
    report.findings.resize(targets.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= targets.size()) return;
            try {
                report.findings[i] = analyze_target(index, graph, config, gateway, targets[i]);
            } catch (const std::exception& e) {
                Finding f;
                f.function = targets[i];
                f.error = e.what();
                report.findings[i] = std::move(f);
            }
        }
    };
    int jobs = std::max(1, config.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::sort(report.findings.begin(), report.findings.end(),
              [](const Finding& a, const Finding& b) { return a.function < b.function; });
    for (const Finding& f : report.findings) {
        if (!f.error.empty()) ++report.errors;
        else if (f.out_of_scope) ++report.out_of_scope;
        else if (!f.verdict) ++report.abstentions;
        else if (f.verdict->judge) ++report.flagged;
    }
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

namespace {

nlohmann::ordered_json verdict_json(const std::optional<Verdict>& v) {
    nlohmann::ordered_json j;
    if (!v) {
        j["abstained"] = true;
        return j;
    }
    j["judge"] = v->judge;
    if (v->cwe) j["cwe"] = *v->cwe;
    return j;
}

} // namespace

std::string findings_to_jsonl(const FindingsReport& report) {
    std::ostringstream out;
    for (const Finding& f : report.findings) {
        nlohmann::ordered_json j;
        j["schema"] = 1;
        j["function"] = f.function;
        if (!f.error.empty()) {
            j["error"] = f.error;
        } else {
            j["verdict"] = verdict_json(f.verdict);
            auto votes = nlohmann::ordered_json::array();
            for (const auto& v : f.votes) votes.push_back(verdict_json(v));
            j["votes"] = std::move(votes);
            if (f.policy) j["policy"] = f.policy->cwes;
            j["rounds_used"] = f.rounds_used;
            if (f.out_of_scope) j["out_of_scope"] = true;
        }
        out << j.dump() << '\n';
    }
    return out.str();
}

FindingsReport findings_from_jsonl(const std::string& jsonl) {
    FindingsReport report;
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        Finding f;
        f.function = j.at("function").get<std::string>();
        if (j.contains("error")) {
            f.error = j.at("error").get<std::string>();
        } else {
            const auto& vj = j.at("verdict");
            if (!(vj.contains("abstained") && vj.at("abstained").get<bool>())) {
                Verdict v;
                v.judge = vj.at("judge").get<bool>();
                if (vj.contains("cwe")) v.cwe = vj.at("cwe").get<std::string>();
                f.verdict = v;
            }
            if (j.contains("rounds_used")) f.rounds_used = j.at("rounds_used").get<int>();
            if (j.contains("out_of_scope")) f.out_of_scope = j.at("out_of_scope").get<bool>();
        }
        report.findings.push_back(std::move(f));
    }
    report.total_targets = static_cast<int>(report.findings.size());
    for (const Finding& f : report.findings) {
        if (!f.error.empty()) ++report.errors;
        else if (f.out_of_scope) ++report.out_of_scope;
        else if (!f.verdict) ++report.abstentions;
        else if (f.verdict->judge) ++report.flagged;
    }
    return report;
}

nlohmann::ordered_json report_summary(const FindingsReport& report) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["total_targets"] = report.total_targets;
    j["flagged"] = report.flagged;
    j["benign"] = report.total_targets - report.flagged - report.abstentions -
                  report.out_of_scope - report.errors;
    j["abstentions"] = report.abstentions;
    j["out_of_scope"] = report.out_of_scope;
    j["errors"] = report.errors;
    j["wall_time_seconds"] = report.wall_time_seconds;
    return j;
}

} // namespace vulnscout
