#include "vulnscout/eval.hpp"

#include <algorithm>

#include "vulnscout/error.hpp"

namespace vulnscout {

double f1_of(const ConfusionCounts& c) {
    long long denom = 2 * c.tp + c.fp + c.fn;
    return denom > 0 ? 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom) : 0.0;
}

double fpr_of(const ConfusionCounts& c) {
    long long denom = c.fp + c.tn;
    return denom > 0 ? static_cast<double>(c.fp) / static_cast<double>(denom) : 0.0;
}

double fnr_of(const ConfusionCounts& c) {
    long long denom = c.fn + c.tp;
    return denom > 0 ? static_cast<double>(c.fn) / static_cast<double>(denom) : 0.0;
}

EvalReport score_function_level(const std::vector<std::optional<Verdict>>& predictions,
                                const std::vector<GroundTruthLabel>& labels) {
    if (predictions.size() != labels.size())
        throw Error(Errc::length_mismatch,
                    std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");

    EvalReport report;
    std::set<std::string> cwe_classes;

    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& pred = predictions[i];
        const auto& label = labels[i];
        if (!pred) ++report.abstentions;

        bool pred_yes = pred && pred->judge;
        std::optional<std::string> pc;
        if (pred_yes && pred->cwe) pc = consolidate_cwe(*pred->cwe);
        std::optional<std::string> lc;
        if (label.vulnerable && label.cwe) lc = consolidate_cwe(*label.cwe);

        // detection-only (judge credit)
        if (label.vulnerable && pred_yes) ++report.detection_only.tp;
        else if (label.vulnerable && !pred_yes) ++report.detection_only.fn;
        else if (!label.vulnerable && pred_yes) ++report.detection_only.fp;
        else ++report.detection_only.tn;

        // CWE-aware overall
        if (label.vulnerable && pred_yes && pc && lc && *pc == *lc) {
            ++report.overall.tp;
        } else if (label.vulnerable && pred_yes) {
            ++report.overall.fp; // wrong CWE: FP against the benign class
        } else if (label.vulnerable) {
            ++report.overall.fn;
        } else if (pred_yes) {
            ++report.overall.fp;
        } else {
            ++report.overall.tn;
        }

        // one-vs-rest per CWE
        if (lc) cwe_classes.insert(*lc);
        if (pc) cwe_classes.insert(*pc);
        if (lc && pc && *lc == *pc) {
            ++report.per_cwe[*lc].tp;
        } else {
            if (lc) ++report.per_cwe[*lc].fn;
            if (pc) ++report.per_cwe[*pc].fp;
        }
    }

    long long n = static_cast<long long>(predictions.size());
    for (const std::string& cwe : cwe_classes) {
        ConfusionCounts& c = report.per_cwe[cwe];
        c.tn = n - c.tp - c.fp - c.fn;
    }

    report.f1 = f1_of(report.overall);
    report.fpr = fpr_of(report.overall);
    report.fnr = fnr_of(report.overall);
    report.detection_f1 = f1_of(report.detection_only);
    return report;
}

namespace {

nlohmann::ordered_json counts_json(const ConfusionCounts& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

} // namespace

nlohmann::ordered_json eval_report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["overall"] = counts_json(report.overall);
    j["f1"] = report.f1;
    j["fpr"] = report.fpr;
    j["fnr"] = report.fnr;
    j["detection_only"] = counts_json(report.detection_only);
    j["detection_f1"] = report.detection_f1;
    auto& per = j["per_cwe"] = nlohmann::ordered_json::object();
    for (const auto& [cwe, counts] : report.per_cwe) {
        per[cwe] = counts_json(counts);
        per[cwe]["f1"] = f1_of(counts);
    }
    j["abstentions"] = report.abstentions;
    j["mean_wall_time"] = report.mean_wall_time;
    return j;
}

ProjectScore score_project_level(const FindingsReport& findings,
                                 const std::map<std::string, std::set<std::string>>& truth) {
    ProjectScore score;

    std::set<std::string> flagged;
    std::set<std::string> scanned;
    for (const Finding& f : findings.findings) {
        scanned.insert(f.function);
        if (f.verdict && f.verdict->judge) flagged.insert(f.function); // once per function
    }

    std::set<std::string> in_truth;
    for (const auto& [vuln, fns] : truth) {
        bool detected = false;
        for (const std::string& fn : fns) {
            in_truth.insert(fn);
            if (!scanned.count(fn)) score.unknown_functions.push_back(fn);
            if (flagged.count(fn)) detected = true;
        }
        score.per_vuln[vuln] = detected;
        if (detected) ++score.tp;
    }

    for (const std::string& fn : flagged) {
        if (!in_truth.count(fn)) {
            ++score.fp;
            score.false_positive_functions.push_back(fn);
        }
    }
    std::sort(score.unknown_functions.begin(), score.unknown_functions.end());
    score.unknown_functions.erase(
        std::unique(score.unknown_functions.begin(), score.unknown_functions.end()),
        score.unknown_functions.end());
    return score;
}

nlohmann::ordered_json project_score_to_json(const ProjectScore& score) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["tp"] = score.tp;
    j["fp"] = score.fp;
    auto& per = j["per_vulnerability"] = nlohmann::ordered_json::object();
    for (const auto& [vuln, detected] : score.per_vuln) per[vuln] = detected;
    j["false_positive_functions"] = score.false_positive_functions;
    j["unknown_functions"] = score.unknown_functions;
    return j;
}

} // namespace vulnscout
