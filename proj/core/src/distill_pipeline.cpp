#include "vulnscout/distill_pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "vulnscout/error.hpp"
#include "vulnscout/inference_engine.hpp"
#include "vulnscout/text.hpp"

namespace vulnscout {

std::vector<Constitution> load_constitutions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot read constitutions " + path.string());
    std::vector<Constitution> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty() || line[0] == '#') continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) continue;
        Constitution c;
        c.cwe = trim(line.substr(0, tab));
        c.guidance = trim(line.substr(tab + 1));
        if (!c.cwe.empty() && !c.guidance.empty()) out.push_back(std::move(c));
    }
    return out;
}

std::vector<Constitution> constitutions_for(const std::vector<Constitution>& table,
                                            const std::string& cwe) {
    std::vector<Constitution> out;
    std::string consolidated = consolidate_cwe(cwe);
    for (const Constitution& c : table)
        if (c.cwe == cwe || consolidate_cwe(c.cwe) == consolidated) out.push_back(c);
    return out;
}

bool verdict_matches_label(const Verdict& verdict, const Sample& sample) {
    if (!sample.vulnerable) return !verdict.judge;
    if (!verdict.judge || !verdict.cwe || !sample.cwe) return false;
    return consolidate_cwe(*verdict.cwe) == consolidate_cwe(*sample.cwe);
}

namespace {

std::string guided_prompt(const std::string& plain,
                          const std::vector<Constitution>& guidance) {
    if (guidance.empty()) return plain;
    std::string out = plain;
    out += "\nAnalysis Guidance:\n";
    for (const Constitution& c : guidance) {
        out += "- ";
        out += c.guidance;
        out += '\n';
    }
    return out;
}

RejectionResult sample_with_prompt(const Sample& sample, const std::string& prompt,
                                   const std::string& plain_prompt,
                                   const std::vector<std::shared_ptr<Backend>>& teachers,
                                   const std::vector<std::string>& constitution_ids,
                                   int attempts, GenerationParams params) {
    RejectionResult result;
    std::vector<ChatMessage> messages{{Role::user, prompt, std::nullopt, std::nullopt}};

    for (std::size_t t = 0; t < teachers.size(); ++t) {
        Backend& teacher = *teachers[t];
        for (int a = 0; a < attempts; ++a) {
            GenerationParams p = params;
            p.seed = fnv1a_mix(params.seed.value_or(0),
                               sample.id + "/" + teacher.id() + "/" + std::to_string(a));
            AttemptRecord attempt{teacher.id(), a, false, 0};
            std::string text;
            int tokens = 0;
            try {
                Completion c = teacher.generate(messages, p, {});
                text = c.text;
                tokens = c.output_tokens;
            } catch (const std::exception&) {
                result.attempts.push_back(attempt); // backend error = wrong attempt
                continue;
            }
            attempt.total_tokens = tokens;
            auto verdict = parse_verdict(text);
            attempt.correct = verdict && verdict_matches_label(*verdict, sample);
            result.attempts.push_back(attempt);
            if (!attempt.correct) continue;

            if (!result.trace || tokens < result.trace->total_tokens) {
                ReasoningTrace trace;
                trace.sample_id = sample.id;
                trace.teacher = teacher.id();
                trace.prompt = prompt;
                trace.plain_prompt = plain_prompt;
                trace.reasoning = text;
                trace.verdict = *verdict;
                trace.total_tokens = tokens;
                trace.correct = true;
                trace.constitution_used = constitution_ids;
                result.trace = std::move(trace);
            }
        }
    }
    return result;
}

} // namespace

RejectionResult rejection_sample(const Sample& sample,
                                 const std::vector<std::shared_ptr<Backend>>& teachers,
                                 int attempts, GenerationParams params) {
    auto [context, target] = sample.context_markers
                                 ? split_context_markers(sample.code)
                                 : std::make_pair(std::string(), sample.code);
    std::string prompt = render_detection_prompt(
        target, context.empty() ? std::nullopt : std::optional<std::string_view>(context));
    return sample_with_prompt(sample, prompt, prompt, teachers, {}, attempts, params);
}

RejectionResult constitution_correct(const Sample& sample,
                                     const std::vector<std::shared_ptr<Backend>>& teachers,
                                     const std::vector<Constitution>& constitutions,
                                     int attempts, GenerationParams params) {
    if (!sample.vulnerable || !sample.cwe)
        throw Error(Errc::no_constitution, "benign sample " + sample.id);
    std::vector<Constitution> matching = constitutions_for(constitutions, *sample.cwe);
    if (matching.empty())
        throw Error(Errc::no_constitution, "no guidance for " + *sample.cwe);

    auto [context, target] = sample.context_markers
                                 ? split_context_markers(sample.code)
                                 : std::make_pair(std::string(), sample.code);
    std::string plain = render_detection_prompt(
        target, context.empty() ? std::nullopt : std::optional<std::string_view>(context));
    std::string prompt = guided_prompt(plain, matching);

    std::vector<std::string> ids;
    for (std::size_t i = 0; i < matching.size(); ++i)
        ids.push_back(matching[i].cwe + "#" + std::to_string(i));
    return sample_with_prompt(sample, prompt, plain, teachers, ids, attempts, params);
}

bool filter_by_length(const ReasoningTrace& trace, int limit) {
    long long prompt_tokens = static_cast<long long>(approx_token_count(trace.prompt));
    return prompt_tokens + trace.total_tokens <= limit;
}

namespace {

// Split text into (everything before the last answer header, the answer
// block from its header to the end).
std::pair<std::string, std::string> split_answer_block(const std::string& text) {
    std::size_t pos = text.rfind("Final Answer");
    if (pos == std::string::npos) return {text, ""};
    // back up over "## " and trailing spaces
    std::size_t start = pos;
    while (start > 0 && (text[start - 1] == ' ' || text[start - 1] == '\t')) --start;
    while (start > 0 && text[start - 1] == '#') --start;
    return {text.substr(0, start), text.substr(start)};
}

} // namespace

ReasoningTrace summarize_trace(const ReasoningTrace& trace, Backend& summarizer,
                               GenerationParams params) {
    std::string prompt =
        "Summarize the following vulnerability analysis. Keep only the important and "
        "relevant steps while preserving the overall reasoning structure, and end with "
        "the exact same final answer block.\n\n";
    prompt += trace.reasoning;
    std::vector<ChatMessage> messages{{Role::user, prompt, std::nullopt, std::nullopt}};
    Completion c = summarizer.generate(messages, params, {});

    auto emitted = parse_verdict(c.text);
    if (emitted) {
        bool same = emitted->judge == trace.verdict.judge &&
                    emitted->cwe.has_value() == trace.verdict.cwe.has_value() &&
                    (!emitted->cwe || *emitted->cwe == *trace.verdict.cwe);
        if (!same)
            throw Error(Errc::summary_verdict_drift, trace.sample_id);
    }

    auto [summary_body, summary_answer] = split_answer_block(c.text);
    auto [original_body, original_answer] = split_answer_block(trace.reasoning);
    (void)original_body;

    ReasoningTrace out = trace;
    out.stage = "summary";
    out.teacher = summarizer.id();
    std::string body = summary_body;
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
    out.reasoning = body + "\n" + original_answer; // original block reattached verbatim
    out.total_tokens = static_cast<int>(approx_token_count(out.reasoning));
    return out;
}

TrainingRecord strip_guidance(const ReasoningTrace& trace) {
    TrainingRecord rec;
    rec.sample_id = trace.sample_id;
    rec.stage = trace.stage;
    rec.prompt = trace.plain_prompt;
    rec.target = trace.reasoning;
    rec.mask_spans = {{0, rec.prompt.size()}};
    rec.teacher = trace.teacher;
    rec.constitution_used = trace.constitution_used;
    return rec;
}

nlohmann::ordered_json training_record_to_json(const TrainingRecord& rec) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["sample_id"] = rec.sample_id;
    j["stage"] = rec.stage;
    j["prompt"] = rec.prompt;
    j["target"] = rec.target;
    auto spans = nlohmann::ordered_json::array();
    for (auto [b, e] : rec.mask_spans) spans.push_back({b, e});
    j["mask_spans"] = std::move(spans);
    j["teacher"] = rec.teacher;
    j["constitution_used"] = rec.constitution_used;
    return j;
}

std::optional<AgenticTrajectory> record_agentic_trajectory(
    const std::string& session_id, const std::vector<ChatMessage>& transcript,
    const std::optional<Verdict>& final_verdict, const Sample& ground_truth) {
    if (!final_verdict) return std::nullopt;
    if (!verdict_matches_label(*final_verdict, ground_truth)) return std::nullopt;

    // every tool call must be answered before anything else happens
    for (std::size_t i = 0; i < transcript.size(); ++i) {
        if (transcript[i].role == Role::assistant && transcript[i].tool_call) {
            if (i + 1 >= transcript.size() || transcript[i + 1].role != Role::tool)
                return std::nullopt;
        }
    }

    AgenticTrajectory t;
    t.session_id = session_id;
    t.messages = transcript;
    t.final_verdict = *final_verdict;
    t.correct = true;
    return t;
}

TrainingRecord trajectory_to_training_record(const AgenticTrajectory& trajectory) {
    TrainingRecord rec;
    rec.sample_id = trajectory.session_id;
    rec.stage = "agentic";

    std::string text;
    std::vector<std::pair<std::size_t, std::size_t>> masked;
    auto mask_from = [&](std::size_t begin) { masked.emplace_back(begin, text.size()); };

    for (const ChatMessage& m : trajectory.messages) {
        std::size_t header_begin = text.size();
        text += "<|";
        text += role_name(m.role);
        text += "|>\n";
        if (m.role == Role::assistant) {
            mask_from(header_begin); // role tag is template, not a target
            text += m.content;
            if (m.tool_call) {
                if (!m.content.empty()) text += '\n';
                text += "Invoking `" + m.tool_call->name + "` with `" +
                        m.tool_call->arguments + "`";
            }
            text += '\n';
        } else {
            text += m.role == Role::tool && m.tool_result ? *m.tool_result : m.content;
            text += '\n';
            mask_from(header_begin);
        }
    }

    // merge adjacent masked spans
    std::sort(masked.begin(), masked.end());
    std::vector<std::pair<std::size_t, std::size_t>> merged;
    for (auto span : masked) {
        if (!merged.empty() && merged.back().second >= span.first)
            merged.back().second = std::max(merged.back().second, span.second);
        else
            merged.push_back(span);
    }

    rec.prompt = "";
    rec.target = std::move(text);
    rec.mask_spans = std::move(merged);
    return rec;
}

CheckpointStore::CheckpointStore(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(file_);
    std::string line;
    while (in && std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            done_.insert(j.at("sample_id").get<std::string>());
        } catch (const nlohmann::json::exception&) {
        }
    }
}

bool CheckpointStore::done(const std::string& sample_id) const {
    std::lock_guard lock(mu_);
    return done_.count(sample_id) > 0;
}

void CheckpointStore::mark(const std::string& sample_id, const std::string& outcome) {
    std::lock_guard lock(mu_);
    done_.insert(sample_id);
    std::ofstream out(file_, std::ios::app);
    nlohmann::ordered_json j;
    j["sample_id"] = sample_id;
    j["outcome"] = outcome;
    out << j.dump() << '\n';
}

std::vector<TrainingRecord> run_distillation(const std::vector<Sample>& samples,
                                             const std::vector<std::shared_ptr<Backend>>& teachers,
                                             const std::vector<Constitution>& constitutions,
                                             Backend* summarizer, const DistillConfig& config,
                                             CheckpointStore* checkpoint,
                                             DistillStats* stats) {
    std::vector<TrainingRecord> records;
    DistillStats local;
    DistillStats& st = stats ? *stats : local;

    for (const Sample& sample : samples) {
        ++st.samples;
        if (checkpoint && checkpoint->done(sample.id)) {
            ++st.skipped_checkpoint;
            continue;
        }

        RejectionResult rr = rejection_sample(sample, teachers, config.attempts,
                                              config.params);
        bool corrected = false;
        if (!rr.trace && sample.vulnerable && sample.cwe &&
            !constitutions_for(constitutions, *sample.cwe).empty()) {
            rr = constitution_correct(sample, teachers, constitutions, config.attempts,
                                      config.params);
            corrected = true;
        }
        std::string outcome;
        if (!rr.trace) {
            ++st.rejected;
            outcome = "rejected";
        } else if (!filter_by_length(*rr.trace, config.length_limit)) {
            ++st.dropped_length;
            outcome = "dropped_length";
        } else {
            corrected ? ++st.kept_corrected : ++st.kept_plain;
            outcome = corrected ? "kept_corrected" : "kept";

            std::vector<ReasoningTrace> stages{*rr.trace};
            if (summarizer && config.summarize) {
                try {
                    stages.push_back(summarize_trace(*rr.trace, *summarizer,
                                                     config.params));
                    ++st.summaries;
                } catch (const Error& e) {
                    if (e.code() != Errc::summary_verdict_drift) throw;
                    ++st.summary_drift;
                }
            }
            for (const ReasoningTrace& trace : stages) {
                TrainingRecord rec = strip_guidance(trace);
                // emit-time re-verification against ground truth
                auto reparsed = parse_verdict(rec.target);
                if (!reparsed || !verdict_matches_label(*reparsed, sample)) continue;
                records.push_back(std::move(rec));
            }
        }
        if (checkpoint) checkpoint->mark(sample.id, outcome);
    }
    return records;
}

} // namespace vulnscout
