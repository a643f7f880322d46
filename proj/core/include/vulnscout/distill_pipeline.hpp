#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulnscout/corpus_forge.hpp"
#include "vulnscout/model_gateway.hpp"

namespace vulnscout {

struct Constitution {
    std::string cwe;
    std::string guidance;
};

// UTF-8 table, one `CWE-id<TAB>guidance` per line; '#' lines are comments.
std::vector<Constitution> load_constitutions(const std::filesystem::path& path);
std::vector<Constitution> constitutions_for(const std::vector<Constitution>& table,
                                            const std::string& cwe);

struct ReasoningTrace {
    std::string sample_id;
    std::string teacher;
    std::string prompt;       // prompt as queried (may carry guidance)
    std::string plain_prompt; // guidance-free detection prompt
    std::string reasoning;    // full completion text, answer block included
    Verdict verdict;
    int total_tokens = 0;
    bool correct = false;
    std::vector<std::string> constitution_used;
    std::string stage = "full"; // full | summary
};

struct AttemptRecord {
    std::string teacher;
    int attempt = 0;
    bool correct = false;
    int total_tokens = 0;
};

struct RejectionResult {
    std::optional<ReasoningTrace> trace; // globally shortest correct attempt
    std::vector<AttemptRecord> attempts;
};

// Whether a parsed verdict matches the sample's ground truth: the judges
// agree and, for vulnerable samples, the consolidated CWEs agree.
bool verdict_matches_label(const Verdict& verdict, const Sample& sample);

// `attempts` completions per teacher; among correct traces the one with the
// fewest total tokens wins, ties by teacher order then attempt index.
RejectionResult rejection_sample(const Sample& sample,
                                 const std::vector<std::shared_ptr<Backend>>& teachers,
                                 int attempts = 8, GenerationParams params = {});

// Re-runs rejection sampling with the matching constitutions' guidance
// spliced into the prompt. Throws NO_CONSTITUTION when the sample is benign
// or no guidance covers its CWE.
RejectionResult constitution_correct(const Sample& sample,
                                     const std::vector<std::shared_ptr<Backend>>& teachers,
                                     const std::vector<Constitution>& constitutions,
                                     int attempts = 8, GenerationParams params = {});

// keep iff prompt tokens + output tokens <= limit (inclusive bound).
bool filter_by_length(const ReasoningTrace& trace, int limit = 32000);

// Teacher-summarized reasoning with the original answer block reattached
// verbatim. Throws SUMMARY_VERDICT_DRIFT when the summary's own verdict
// contradicts the original.
ReasoningTrace summarize_trace(const ReasoningTrace& trace, Backend& summarizer,
                               GenerationParams params = {});

struct TrainingRecord {
    std::string sample_id;
    std::string stage; // full | summary | agentic
    std::string prompt;
    std::string target;
    std::vector<std::pair<std::size_t, std::size_t>> mask_spans; // over prompt+target
    std::string teacher;
    std::vector<std::string> constitution_used;
};

// Emits the guidance-free prompt with the reasoning/answer verbatim; prompt
// chars are the masked span.
TrainingRecord strip_guidance(const ReasoningTrace& trace);

nlohmann::ordered_json training_record_to_json(const TrainingRecord& rec);

struct AgenticTrajectory {
    std::string session_id;
    std::vector<ChatMessage> messages;
    Verdict final_verdict;
    bool correct = false;
};

// Keeps a completed tool-loop session whose final verdict matches ground
// truth; incorrect or unfinished sessions are dropped.
std::optional<AgenticTrajectory> record_agentic_trajectory(
    const std::string& session_id, const std::vector<ChatMessage>& transcript,
    const std::optional<Verdict>& final_verdict, const Sample& ground_truth);

// Serialized conversation with every non-assistant span masked.
TrainingRecord trajectory_to_training_record(const AgenticTrajectory& trajectory);

// Per-sample resume log: completed sample ids survive interruption.
class CheckpointStore {
public:
    explicit CheckpointStore(std::filesystem::path file);
    bool done(const std::string& sample_id) const;
    void mark(const std::string& sample_id, const std::string& outcome);

private:
    std::filesystem::path file_;
    mutable std::mutex mu_;
    std::set<std::string> done_;
};

struct DistillConfig {
    int attempts = 8;
    int length_limit = 32000;
    bool summarize = false;
    GenerationParams params;
};

struct DistillStats {
    int samples = 0;
    int kept_plain = 0;
    int kept_corrected = 0;
    int rejected = 0;
    int dropped_length = 0;
    int summaries = 0;
    int summary_drift = 0;
    int skipped_checkpoint = 0;
};

// Full pipeline over a sample list: rejection sampling, constitution
// correction for failures, length filtering, optional summary stage,
// guidance stripping. Emit-time re-verification guarantees every record's
// answer matches ground truth.
std::vector<TrainingRecord> run_distillation(const std::vector<Sample>& samples,
                                             const std::vector<std::shared_ptr<Backend>>& teachers,
                                             const std::vector<Constitution>& constitutions,
                                             Backend* summarizer, const DistillConfig& config,
                                             CheckpointStore* checkpoint,
                                             DistillStats* stats);

} // namespace vulnscout
