#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vulnscout/callgraph.hpp"
#include "vulnscout/context_retriever.hpp"
#include "vulnscout/corpus_forge.hpp"
#include "vulnscout/distill_pipeline.hpp"
#include "vulnscout/error.hpp"
#include "vulnscout/eval.hpp"
#include "vulnscout/inference_engine.hpp"
#include "vulnscout/model_gateway.hpp"
#include "vulnscout/source_index.hpp"
#include "vulnscout/text.hpp"

namespace fs = std::filesystem;
using namespace vulnscout;

namespace {

// Key-value config with [section] headers; CLI flags override config keys.
class Config {
public:
    void load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw Error(Errc::usage, "cannot read config " + path.string());
        std::string line;
        std::string section;
        while (std::getline(in, line)) {
            std::string t = trim(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[' && t.back() == ']') {
                section = trim(t.substr(1, t.size() - 2));
                continue;
            }
            std::size_t eq = t.find('=');
            if (eq == std::string::npos) continue;
            values_[section + "." + trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
        }
    }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    template <typename T>
    void fall_back(const CLI::Option* opt, const std::string& key, T& value) const {
        if (opt && opt->count() > 0) return; // explicit flag wins
        auto v = get(key);
        if (!v) return;
        std::istringstream ss(*v);
        ss >> value;
    }

    void fall_back(const CLI::Option* opt, const std::string& key, std::string& value) const {
        if (opt && opt->count() > 0) return;
        if (auto v = get(key)) value = *v;
    }

    void fall_back(const CLI::Option* opt, const std::string& key, bool& value) const {
        if (opt && opt->count() > 0) return;
        if (auto v = get(key)) value = *v == "true" || *v == "1" || *v == "yes";
    }

private:
    std::map<std::string, std::string> values_;
};

Language parse_lang(const std::string& name) {
    auto lang = language_from_string(name);
    if (!lang) throw Error(Errc::usage, "unknown language '" + name + "'");
    return *lang;
}

ProjectIndex load_or_parse_index(const std::string& root, Language lang,
                                 const std::string& cache) {
    if (!cache.empty() && fs::exists(cache)) return load_index(cache);
    ProjectIndex index = parse_project(root, lang);
    if (!cache.empty()) save_index(index, cache);
    return index;
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << content;
}

std::set<std::string> parse_cwe_set(const std::string& csv) {
    std::set<std::string> out;
    for (const std::string& part : split(csv, ',')) {
        std::string t = trim(part);
        if (t.empty()) continue;
        auto cwe = normalize_cwe(t);
        if (!cwe) throw Error(Errc::usage, "bad CWE id '" + t + "'");
        out.insert(*cwe);
    }
    return out;
}

std::string pretty_eval(const EvalReport& r) {
    std::ostringstream out;
    out << "overall        tp=" << r.overall.tp << " fp=" << r.overall.fp
        << " fn=" << r.overall.fn << " tn=" << r.overall.tn << "\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "metrics        f1=%.4f fpr=%.4f fnr=%.4f\n", r.f1,
                  r.fpr, r.fnr);
    out << buf;
    std::snprintf(buf, sizeof(buf), "detection-only f1=%.4f (tp=%lld fp=%lld fn=%lld)\n",
                  r.detection_f1, r.detection_only.tp, r.detection_only.fp,
                  r.detection_only.fn);
    out << buf;
    out << "abstentions    " << r.abstentions << "\n";
    out << "per-CWE:\n";
    for (const auto& [cwe, c] : r.per_cwe) {
        std::snprintf(buf, sizeof(buf), "  %-10s tp=%-4lld fp=%-4lld fn=%-4lld f1=%.4f\n",
                      cwe.c_str(), c.tp, c.fp, c.fn, f1_of(c));
        out << buf;
    }
    return out.str();
}

std::string pretty_project(const ProjectScore& s) {
    std::ostringstream out;
    out << "tp=" << s.tp << " fp=" << s.fp << "\n";
    for (const auto& [vuln, detected] : s.per_vuln)
        out << "  " << vuln << ": " << (detected ? "detected" : "missed") << "\n";
    if (!s.false_positive_functions.empty()) {
        out << "false positives:\n";
        for (const auto& fn : s.false_positive_functions) out << "  " << fn << "\n";
    }
    for (const auto& fn : s.unknown_functions)
        out << "warning: ground-truth function never scanned: " << fn << "\n";
    return out.str();
}

std::optional<std::string> cwe_from_filename(const std::string& name) {
    std::size_t pos = name.find("CWE");
    if (pos == std::string::npos) return std::nullopt;
    std::size_t k = pos + 3;
    std::string digits;
    while (k < name.size() && std::isdigit(static_cast<unsigned char>(name[k])))
        digits += name[k++];
    if (digits.empty()) return std::nullopt;
    return "CWE-" + digits;
}

// ---------------------------------------------------------------------------

int cmd_scan(const Config& cfg, const std::string& root, const std::string& lang_name,
             std::vector<std::string> entries, ScanConfig scan_cfg,
             const std::string& backend_spec, const std::string& in_scope_csv,
             const std::string& index_cache, const std::string& out_path,
             const std::string& summary_path, const std::string& dot_path,
             const std::string& trace_path, bool pretty) {
    (void)cfg;
    Language lang = parse_lang(lang_name);
    ProjectIndex index = load_or_parse_index(root, lang, index_cache);
    for (const SkippedFile& s : index.skipped)
        std::cerr << "warning: skipped " << s.file << ": " << s.reason << "\n";

    CallGraph graph = resolve_indirect_edges(index, build_direct_graph(index));
    set_entry_points(graph, entries);
    if (!dot_path.empty()) write_or_print(dot_path, graph_to_dot(graph));

    if (!in_scope_csv.empty()) scan_cfg.in_scope_cwes = parse_cwe_set(in_scope_csv);
    scan_cfg.entry_points = entries;

    Gateway gateway(make_backend(backend_spec));
    FindingsReport report = scan_project(index, graph, scan_cfg, gateway);

    write_or_print(out_path, findings_to_jsonl(report));
    nlohmann::ordered_json summary = report_summary(report);
    if (!summary_path.empty()) write_or_print(summary_path, summary.dump(2) + "\n");
    if (!trace_path.empty())
        write_or_print(trace_path, gateway.trace().to_json().dump(2) + "\n");

    if (pretty) {
        std::cout << "targets=" << report.total_targets << " flagged=" << report.flagged
                  << " abstained=" << report.abstentions
                  << " out_of_scope=" << report.out_of_scope
                  << " errors=" << report.errors << "\n";
        for (const Finding& f : report.findings)
            if (f.verdict && f.verdict->judge)
                std::cout << "  " << f.function << "  " << f.verdict->cwe.value_or("?")
                          << "\n";
    } else if (!out_path.empty()) {
        std::cout << summary.dump() << "\n";
    }
    return 0;
}

int cmd_graph(const std::string& root, const std::string& lang_name,
              std::vector<std::string> entries, const std::string& index_cache,
              const std::string& dot_path, const std::string& json_path) {
    Language lang = parse_lang(lang_name);
    ProjectIndex index = load_or_parse_index(root, lang, index_cache);
    CallGraph graph = resolve_indirect_edges(index, build_direct_graph(index));
    set_entry_points(graph, entries);
    if (!dot_path.empty()) write_or_print(dot_path, graph_to_dot(graph));
    if (!json_path.empty() || dot_path.empty())
        write_or_print(json_path, graph_to_json(graph).dump(2) + "\n");
    return 0;
}

int cmd_corpus_juliet(const std::string& in_dir, const std::string& out_path,
                      const std::string& lang_name, std::uint64_t seed) {
    Language lang = parse_lang(lang_name);
    std::vector<Sample> samples;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        bool want = lang == Language::java ? ext == ".java"
                                           : (ext == ".c" || ext == ".cpp" || ext == ".cc");
        if (want) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    int skipped = 0;
    for (const fs::path& file : files) {
        std::string name = file.filename().string();
        std::ifstream in(file, std::ios::binary);
        std::string source((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
        auto cwe = cwe_from_filename(name);
        if (!cwe) cwe = cwe_from_filename(source); // testcase ids also appear inline
        if (!cwe) {
            std::cerr << "warning: no CWE id in " << name << ", skipped\n";
            ++skipped;
            continue;
        }
        JulietSplit sp;
        try {
            sp = lang == Language::java ? split_juliet_java(source)
                                        : split_juliet_c(source);
        } catch (const Error& e) {
            std::cerr << "warning: " << name << ": " << e.what() << "\n";
            ++skipped;
            continue;
        }
        std::uint64_t file_seed = fnv1a_mix(seed, name);

        Sample vuln;
        vuln.id = name + "#vuln";
        vuln.code = obfuscate(sp.vulnerable, lang, file_seed);
        vuln.vulnerable = true;
        vuln.cwe = cwe;
        vuln.language = lang;
        vuln.provenance_dataset = "juliet";
        vuln.provenance_origin = name;
        samples.push_back(std::move(vuln));

        Sample benign;
        benign.id = name + "#benign";
        benign.code = obfuscate(sp.benign, lang, fnv1a_mix(file_seed, "benign"));
        benign.language = lang;
        benign.provenance_dataset = "juliet";
        benign.provenance_origin = name;
        samples.push_back(std::move(benign));
    }
    samples_to_jsonl_file(samples, out_path);
    std::cerr << "wrote " << samples.size() << " samples (" << skipped << " files skipped)\n";
    return 0;
}

int cmd_corpus_arvo(const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in) throw Error(Errc::io, "cannot read " + in_path);
    std::vector<Sample> samples;
    std::string line;
    int skipped = 0;
    auto fn_of = [](const std::string& body, int i) {
        FunctionRecord f;
        f.qualified_name = "fn" + std::to_string(i);
        f.source_text = body;
        return f;
    };
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        SanitizerReport report{j.at("sanitizer_report").get<std::string>()};
        auto cwe = infer_cwe_from_sanitizer(report);
        if (!cwe) {
            // only samples whose sanitizer output matches a rule are retained
            ++skipped;
            continue;
        }
        std::vector<FunctionRecord> ctx, tgt;
        int i = 0;
        for (const auto& body : j.value("context", nlohmann::json::array()))
            ctx.push_back(fn_of(body.get<std::string>(), i++));
        for (const auto& body : j.at("target"))
            tgt.push_back(fn_of(body.get<std::string>(), i++));

        Sample vuln = build_project_sample(ctx, tgt, {true, cwe});
        vuln.id = j.at("id").get<std::string>() + "#vuln";
        vuln.provenance_dataset = "arvo";
        vuln.provenance_origin = j.at("id").get<std::string>();
        samples.push_back(std::move(vuln));

        if (j.contains("patched_target")) {
            std::vector<FunctionRecord> patched;
            for (const auto& body : j.at("patched_target"))
                patched.push_back(fn_of(body.get<std::string>(), i++));
            Sample benign = build_project_sample(ctx, patched, {false, std::nullopt});
            benign.id = j.at("id").get<std::string>() + "#benign";
            benign.provenance_dataset = "arvo";
            benign.provenance_origin = j.at("id").get<std::string>();
            samples.push_back(std::move(benign));
        }
    }
    samples_to_jsonl_file(samples, out_path);
    std::cerr << "wrote " << samples.size() << " samples (" << skipped
              << " lines without a matching sanitizer rule)\n";
    return 0;
}

int cmd_corpus_dedup(const std::string& in_path, const std::string& out_path,
                     const std::string& against_path, int ngram) {
    std::vector<Sample> samples = samples_from_jsonl_file(in_path);
    DedupResult result;
    if (against_path.empty()) {
        result = dedup(samples, ngram);
    } else {
        result = dedup_against(samples, samples_from_jsonl_file(against_path), ngram);
    }
    samples_to_jsonl_file(result.kept, out_path);
    for (const auto& [later, earlier] : result.dropped)
        std::cerr << "dropped " << later << " (n-gram overlap with " << earlier << ")\n";
    std::cerr << "kept " << result.kept.size() << " of " << samples.size() << "\n";
    return 0;
}

int cmd_corpus_sufficiency(const std::string& in_path, const std::string& out_path,
                           const std::string& backend_spec) {
    std::vector<Sample> samples = samples_from_jsonl_file(in_path);
    Gateway gateway(make_backend(backend_spec));
    std::vector<Sample> kept;
    for (const Sample& s : samples) {
        SufficiencyResult r = check_context_sufficiency(s, gateway, {});
        if (r.sufficient) {
            kept.push_back(s);
        } else {
            std::cerr << "insufficient context: " << s.id;
            if (!r.needed.empty()) {
                std::cerr << " (needs:";
                for (const auto& fn : r.needed) std::cerr << " " << fn;
                std::cerr << ")";
            }
            std::cerr << "\n";
        }
    }
    samples_to_jsonl_file(kept, out_path);
    std::cerr << "kept " << kept.size() << " of " << samples.size() << "\n";
    return 0;
}

int cmd_distill(const std::string& samples_path, const std::string& teachers_csv,
                const std::string& constitutions_path, const std::string& out_path,
                const std::string& summarizer_spec, const std::string& checkpoint_path,
                int attempts, int length_limit) {
    std::vector<Sample> samples = samples_from_jsonl_file(samples_path);
    std::vector<std::shared_ptr<Backend>> teachers;
    for (const std::string& spec : split(teachers_csv, ','))
        if (!trim(spec).empty()) teachers.push_back(make_backend(trim(spec)));
    if (teachers.empty()) throw Error(Errc::usage, "no teachers given");

    std::vector<Constitution> constitutions;
    if (!constitutions_path.empty()) constitutions = load_constitutions(constitutions_path);

    std::shared_ptr<Backend> summarizer;
    if (!summarizer_spec.empty()) summarizer = make_backend(summarizer_spec);

    std::optional<CheckpointStore> checkpoint;
    if (!checkpoint_path.empty()) checkpoint.emplace(checkpoint_path);

    DistillConfig config;
    config.attempts = attempts;
    config.length_limit = length_limit;
    config.summarize = summarizer != nullptr;

    DistillStats stats;
    std::vector<TrainingRecord> records =
        run_distillation(samples, teachers, constitutions, summarizer.get(), config,
                         checkpoint ? &*checkpoint : nullptr, &stats);

    std::ostringstream out;
    for (const TrainingRecord& rec : records) out << training_record_to_json(rec).dump() << "\n";
    write_or_print(out_path, out.str());

    nlohmann::ordered_json sj;
    sj["samples"] = stats.samples;
    sj["kept_plain"] = stats.kept_plain;
    sj["kept_corrected"] = stats.kept_corrected;
    sj["rejected"] = stats.rejected;
    sj["dropped_length"] = stats.dropped_length;
    sj["summaries"] = stats.summaries;
    sj["summary_drift"] = stats.summary_drift;
    sj["skipped_checkpoint"] = stats.skipped_checkpoint;
    std::cerr << sj.dump() << "\n";
    return 0;
}

// Agentic trace collection: run the tool loop over a project's targets with
// a teacher backend, keep trajectories whose final verdict matches the
// ground-truth function labels, and emit masked training records.
int cmd_distill_agentic(const std::string& root, const std::string& lang_name,
                        const std::vector<std::string>& entries,
                        const std::string& truth_path, const std::string& teachers_csv,
                        const std::string& out_path, int max_rounds) {
    Language lang = parse_lang(lang_name);
    ProjectIndex index = parse_project(root, lang);
    CallGraph graph = resolve_indirect_edges(index, build_direct_graph(index));
    set_entry_points(graph, entries);

    std::map<std::string, std::string> truth; // function -> CWE id
    if (!truth_path.empty()) {
        std::ifstream tin(truth_path);
        if (!tin) throw Error(Errc::io, "cannot read " + truth_path);
        nlohmann::json tj = nlohmann::json::parse(tin);
        for (const auto& [fn, cwe] : tj.items())
            truth[fn] = cwe.get<std::string>();
    }

    std::vector<std::string> specs = split(teachers_csv, ',');
    if (specs.empty() || trim(specs[0]).empty())
        throw Error(Errc::usage, "agentic collection needs --teachers");
    Gateway gateway(make_backend(trim(specs[0])));

    std::set<std::string> targets = select_targets(graph);
    int kept = 0, dropped = 0;
    std::ostringstream out;
    for (const std::string& target : targets) {
        const FunctionRecord* rec = index.by_qualified_name(target);
        if (!rec) continue;

        std::vector<CallPath> paths;
        for (const std::string& entry : graph.entry_points) {
            try {
                auto sampled = sample_call_paths(graph, entry, target, 3,
                                                 fnv1a_mix(fnv1a(entry), target));
                paths.insert(paths.end(), sampled.begin(), sampled.end());
            } catch (const Error& e) {
                if (e.code() != Errc::target_unreachable) throw;
            }
        }
        ContextBundle bundle = assemble_initial_context(*rec, paths, index, 16384);
        RetrievalBudget budget;
        budget.max_rounds = max_rounds;
        ToolLoopResult session = run_tool_loop(std::move(bundle), index, gateway, {},
                                               budget, {}, target);

        Sample ground;
        ground.id = target;
        auto it = truth.find(target);
        if (it != truth.end()) {
            ground.vulnerable = true;
            ground.cwe = it->second;
        }
        auto trajectory = record_agentic_trajectory(target, session.transcript,
                                                    session.verdict, ground);
        if (!trajectory) {
            ++dropped;
            continue;
        }
        out << training_record_to_json(trajectory_to_training_record(*trajectory)).dump()
            << '\n';
        ++kept;
    }
    write_or_print(out_path, out.str());
    std::cerr << "kept " << kept << " trajectories, dropped " << dropped
              << " (wrong or missing verdict)\n";
    return 0;
}

int cmd_eval_function(const std::string& pred_path, const std::string& labels_path,
                      bool pretty) {
    std::vector<Sample> labels = samples_from_jsonl_file(labels_path);
    std::map<std::string, std::optional<Verdict>> preds;
    {
        std::ifstream in(pred_path);
        if (!in) throw Error(Errc::io, "cannot read " + pred_path);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            std::string id = j.at("id").get<std::string>();
            if (j.value("abstained", false)) {
                preds[id] = std::nullopt;
            } else {
                Verdict v;
                v.judge = j.at("judge").get<bool>();
                if (j.contains("cwe") && !j.at("cwe").is_null())
                    v.cwe = j.at("cwe").get<std::string>();
                preds[id] = v;
            }
        }
    }
    std::vector<std::optional<Verdict>> aligned;
    std::vector<GroundTruthLabel> truth;
    for (const Sample& s : labels) {
        auto it = preds.find(s.id);
        if (it == preds.end())
            throw Error(Errc::length_mismatch, "no prediction for sample " + s.id);
        aligned.push_back(it->second);
        truth.push_back({s.vulnerable, s.cwe});
    }
    if (preds.size() != labels.size())
        throw Error(Errc::length_mismatch, "prediction/label counts differ");

    EvalReport report = score_function_level(aligned, truth);
    if (pretty) std::cout << pretty_eval(report);
    else std::cout << eval_report_to_json(report).dump() << "\n";
    return 0;
}

int cmd_eval_project(const std::string& findings_path, const std::string& truth_path,
                     bool pretty) {
    std::ifstream fin(findings_path);
    if (!fin) throw Error(Errc::io, "cannot read " + findings_path);
    std::string jsonl((std::istreambuf_iterator<char>(fin)),
                      std::istreambuf_iterator<char>());
    FindingsReport findings = findings_from_jsonl(jsonl);

    std::ifstream tin(truth_path);
    if (!tin) throw Error(Errc::io, "cannot read " + truth_path);
    nlohmann::json tj = nlohmann::json::parse(tin);
    std::map<std::string, std::set<std::string>> truth;
    for (const auto& [vuln, fns] : tj.items())
        for (const auto& fn : fns) truth[vuln].insert(fn.get<std::string>());

    ProjectScore score = score_project_level(findings, truth);
    for (const std::string& fn : score.unknown_functions)
        std::cerr << "warning: ground-truth function not in findings: " << fn << "\n";
    if (pretty) std::cout << pretty_project(score);
    else std::cout << project_score_to_json(score).dump() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vulnscout: call-graph-guided vulnerability detection scaffold"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key-value config file with sections");

    Config cfg;

    // ---- scan ----
    auto* scan = app.add_subcommand("scan", "scan a project for vulnerable functions");
    std::string root, lang = "c", backend, in_scope, index_cache, out_path = "-";
    std::string summary_path, dot_path, trace_path;
    std::vector<std::string> entries;
    ScanConfig scan_cfg;
    bool pretty = false;
    scan->add_option("--root", root, "project source root")->required();
    auto* o_lang = scan->add_option("--lang", lang, "c|cpp|java|python");
    scan->add_option("--entry", entries, "entry point names or glob patterns");
    auto* o_votes = scan->add_option("--votes", scan_cfg.votes, "parallel queries: 1,4,8,16")
                        ->check(CLI::PositiveNumber);
    auto* o_paths = scan->add_option("--num-paths", scan_cfg.num_paths, "call paths per entry")
                        ->check(CLI::PositiveNumber);
    auto* o_policy = scan->add_flag("--policy", scan_cfg.use_policy, "two-stage policy generation");
    auto* o_backend = scan->add_option("--backend", backend, "mock:<script.json>, URL, or 'env'");
    auto* o_seed = scan->add_option("--seed", scan_cfg.seed, "rng seed");
    auto* o_budget = scan->add_option("--reasoning-budget", scan_cfg.reasoning_budget,
                                      "reasoning token budget (truncated generation)");
    auto* o_rounds = scan->add_option("--max-rounds", scan_cfg.max_rounds, "tool-call round cap");
    auto* o_ctx = scan->add_option("--context-budget", scan_cfg.context_budget_tokens,
                                   "initial context token budget");
    auto* o_jobs = scan->add_option("--jobs", scan_cfg.jobs, "concurrent targets");
    auto* o_scope = scan->add_option("--in-scope", in_scope, "comma-separated CWE allowlist");
    scan->add_option("--index-cache", index_cache, "read/write parsed index JSON");
    scan->add_option("--out", out_path, "findings JSONL path (- for stdout)");
    scan->add_option("--summary", summary_path, "summary JSON path");
    scan->add_option("--emit-dot", dot_path, "write call graph DOT");
    scan->add_option("--trace", trace_path, "write session trace JSON");
    scan->add_flag("--pretty", pretty, "human-readable output");

    // ---- graph ----
    auto* graph = app.add_subcommand("graph", "emit the call graph (DOT/JSON)");
    std::string g_root, g_lang = "c", g_cache, g_dot, g_json;
    std::vector<std::string> g_entries;
    graph->add_option("--root", g_root, "project source root")->required();
    graph->add_option("--lang", g_lang, "c|cpp|java|python");
    graph->add_option("--entry", g_entries, "entry point names or glob patterns");
    graph->add_option("--index-cache", g_cache, "read/write parsed index JSON");
    graph->add_option("--emit-dot", g_dot, "DOT output path");
    graph->add_option("--json", g_json, "JSON edge list path (- for stdout)");

    // ---- corpus ----
    auto* corpus = app.add_subcommand("corpus", "benchmark corpus construction");
    corpus->require_subcommand(1);

    auto* juliet = corpus->add_subcommand("juliet", "split + obfuscate Juliet-style files");
    std::string j_in, j_out, j_lang = "c";
    std::uint64_t j_seed = 0;
    juliet->add_option("--in", j_in, "input directory")->required();
    juliet->add_option("--out", j_out, "output samples JSONL")->required();
    juliet->add_option("--lang", j_lang, "c|java");
    auto* o_jseed = juliet->add_option("--seed", j_seed, "obfuscation seed");

    auto* arvo = corpus->add_subcommand("arvo", "label crash-based project samples");
    std::string a_in, a_out;
    arvo->add_option("--in", a_in, "input JSONL (id, sanitizer_report, context, target)")
        ->required();
    arvo->add_option("--out", a_out, "output samples JSONL")->required();

    auto* dd = corpus->add_subcommand("dedup", "n-gram dedup / decontamination");
    std::string d_in, d_out, d_against;
    int d_ngram = 20;
    dd->add_option("--in", d_in, "input samples JSONL")->required();
    dd->add_option("--out", d_out, "output samples JSONL")->required();
    dd->add_option("--against", d_against, "protect this set; drop overlaps from --in");
    auto* o_ngram = dd->add_option("--ngram", d_ngram, "n-gram size");

    auto* suff = corpus->add_subcommand("sufficiency", "model-checked context sufficiency");
    std::string s_in, s_out, s_backend;
    suff->add_option("--in", s_in, "input samples JSONL")->required();
    suff->add_option("--out", s_out, "output samples JSONL")->required();
    auto* o_sbackend = suff->add_option("--backend", s_backend, "backend spec");

    // ---- distill ----
    auto* distill = app.add_subcommand("distill", "teacher reasoning-data generation");
    std::string t_samples, t_teachers, t_constitutions, t_out = "-", t_summarizer, t_ckpt;
    int t_attempts = 8, t_limit = 32000;
    std::string ag_root, ag_lang = "c", ag_truth;
    std::vector<std::string> ag_entries;
    int ag_rounds = 8;
    distill->add_option("--samples", t_samples, "labeled samples JSONL");
    distill->add_option("--agentic-root", ag_root,
                        "collect agentic trajectories from this project instead");
    distill->add_option("--agentic-lang", ag_lang, "project language for agentic mode");
    distill->add_option("--agentic-entry", ag_entries, "entry points for agentic mode");
    distill->add_option("--agentic-truth", ag_truth,
                        "function -> CWE map; unlisted functions count as benign");
    distill->add_option("--agentic-max-rounds", ag_rounds, "tool-call round cap");
    auto* o_teachers = distill->add_option("--teachers", t_teachers,
                                           "comma-separated backend specs");
    auto* o_attempts = distill->add_option("--attempts", t_attempts, "attempts per teacher");
    auto* o_consts = distill->add_option("--constitutions", t_constitutions,
                                         "CWE<TAB>guidance table");
    auto* o_limit = distill->add_option("--length-limit", t_limit,
                                        "combined prompt+output token cap");
    distill->add_option("--summarizer", t_summarizer, "backend for the summary stage");
    distill->add_option("--checkpoint", t_ckpt, "per-sample resume log");
    distill->add_option("--out", t_out, "training records JSONL (- for stdout)");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "score predictions");
    eval->require_subcommand(1);
    auto* ef = eval->add_subcommand("function", "function-level confusion metrics");
    std::string ef_pred, ef_labels;
    bool ef_pretty = false;
    ef->add_option("--pred", ef_pred, "predictions JSONL (id, judge, cwe, abstained)")
        ->required();
    ef->add_option("--labels", ef_labels, "labeled samples JSONL")->required();
    ef->add_flag("--pretty", ef_pretty, "human-readable output");

    auto* ep = eval->add_subcommand("project", "project-level at-least-one semantics");
    std::string ep_findings, ep_truth;
    bool ep_pretty = false;
    ep->add_option("--findings", ep_findings, "scan findings JSONL")->required();
    ep->add_option("--truth", ep_truth, "vulnerability -> functions JSON")->required();
    ep->add_flag("--pretty", ep_pretty, "human-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (!config_path.empty()) cfg.load(config_path);

        if (scan->parsed()) {
            cfg.fall_back(o_backend, "backend.spec", backend);
            cfg.fall_back(o_lang, "scan.lang", lang);
            cfg.fall_back(o_votes, "scan.votes", scan_cfg.votes);
            cfg.fall_back(o_paths, "scan.num_paths", scan_cfg.num_paths);
            cfg.fall_back(o_policy, "scan.policy", scan_cfg.use_policy);
            cfg.fall_back(o_seed, "scan.seed", scan_cfg.seed);
            cfg.fall_back(o_budget, "scan.reasoning_budget", scan_cfg.reasoning_budget);
            cfg.fall_back(o_rounds, "scan.max_rounds", scan_cfg.max_rounds);
            cfg.fall_back(o_ctx, "scan.context_budget", scan_cfg.context_budget_tokens);
            cfg.fall_back(o_jobs, "scan.jobs", scan_cfg.jobs);
            cfg.fall_back(o_scope, "scan.in_scope", in_scope);
            if (entries.empty())
                if (auto v = cfg.get("scan.entry"))
                    for (const std::string& e : split(*v, ','))
                        if (!trim(e).empty()) entries.push_back(trim(e));
            return cmd_scan(cfg, root, lang, entries, scan_cfg, backend, in_scope,
                            index_cache, out_path, summary_path, dot_path, trace_path,
                            pretty);
        }
        if (graph->parsed())
            return cmd_graph(g_root, g_lang, g_entries, g_cache, g_dot, g_json);
        if (juliet->parsed()) {
            cfg.fall_back(o_jseed, "corpus.seed", j_seed);
            return cmd_corpus_juliet(j_in, j_out, j_lang, j_seed);
        }
        if (arvo->parsed()) return cmd_corpus_arvo(a_in, a_out);
        if (dd->parsed()) {
            cfg.fall_back(o_ngram, "corpus.ngram", d_ngram);
            return cmd_corpus_dedup(d_in, d_out, d_against, d_ngram);
        }
        if (suff->parsed()) {
            cfg.fall_back(o_sbackend, "backend.spec", s_backend);
            return cmd_corpus_sufficiency(s_in, s_out, s_backend);
        }
        if (distill->parsed()) {
            cfg.fall_back(o_teachers, "distill.teachers", t_teachers);
            cfg.fall_back(o_attempts, "distill.attempts", t_attempts);
            cfg.fall_back(o_limit, "distill.length_limit", t_limit);
            cfg.fall_back(o_consts, "distill.constitutions", t_constitutions);
            if (!ag_root.empty())
                return cmd_distill_agentic(ag_root, ag_lang, ag_entries, ag_truth,
                                           t_teachers, t_out, ag_rounds);
            if (t_samples.empty())
                throw Error(Errc::usage, "distill needs --samples or --agentic-root");
            return cmd_distill(t_samples, t_teachers, t_constitutions, t_out, t_summarizer,
                               t_ckpt, t_attempts, t_limit);
        }
        if (ef->parsed()) return cmd_eval_function(ef_pred, ef_labels, ef_pretty);
        if (ep->parsed()) return cmd_eval_project(ep_findings, ep_truth, ep_pretty);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == Errc::usage ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
