#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulnscout/inference_engine.hpp"
#include "vulnscout/model_gateway.hpp"

namespace vulnscout {

struct ConfusionCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    long long tn = 0;

    long long total() const { return tp + fp + fn + tn; }
};

double f1_of(const ConfusionCounts& c);
double fpr_of(const ConfusionCounts& c);
double fnr_of(const ConfusionCounts& c);

struct GroundTruthLabel {
    bool vulnerable = false;
    std::optional<std::string> cwe;
};

struct EvalReport {
    ConfusionCounts overall; // CWE-aware after consolidation
    double f1 = 0.0;
    double fpr = 0.0;
    double fnr = 0.0;
    ConfusionCounts detection_only; // judge-only secondary metric
    double detection_f1 = 0.0;
    std::map<std::string, ConfusionCounts> per_cwe; // one-vs-rest
    long long abstentions = 0;
    double mean_wall_time = 0.0;
};

// Function-level scoring. A prediction of nullopt is an abstention and is
// counted as a benign prediction. TP requires the consolidated CWEs to
// match; a vulnerable prediction with the wrong CWE counts as an FP overall
// and an FN for the true CWE. Throws LENGTH_MISMATCH.
EvalReport score_function_level(const std::vector<std::optional<Verdict>>& predictions,
                                const std::vector<GroundTruthLabel>& labels);

nlohmann::ordered_json eval_report_to_json(const EvalReport& report);

struct ProjectScore {
    int tp = 0; // vulnerabilities with at least one of their functions flagged
    int fp = 0; // flagged functions outside every ground-truth vulnerability
    std::map<std::string, bool> per_vuln;
    std::vector<std::string> false_positive_functions;
    std::vector<std::string> unknown_functions; // named in truth, never scanned
};

// Project-level "at least one flagged function" semantics. Duplicate flags
// of one function count once. Unknown ground-truth functions produce
// warnings, not failures.
ProjectScore score_project_level(const FindingsReport& findings,
                                 const std::map<std::string, std::set<std::string>>& truth);

nlohmann::ordered_json project_score_to_json(const ProjectScore& score);

} // namespace vulnscout
