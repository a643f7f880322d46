#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vulnscout/model_gateway.hpp"
#include "vulnscout/source_index.hpp"

namespace vulnscout {

enum class Scale { function, project };

struct Sample {
    std::string id;
    std::string code;
    bool vulnerable = false;
    std::optional<std::string> cwe; // exactly one, iff vulnerable
    Language language = Language::c;
    Scale scale = Scale::function;
    std::string provenance_dataset;
    std::string provenance_origin;
    bool context_markers = false; // "// context" / "// target function" present
};

nlohmann::ordered_json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);
std::vector<Sample> samples_from_jsonl_file(const std::filesystem::path& path);
void samples_to_jsonl_file(const std::vector<Sample>& samples,
                           const std::filesystem::path& path);

struct JulietSplit {
    std::string vulnerable;
    std::string benign;
};

// Splits a Juliet-style file on its OMITBAD / OMITGOOD preprocessor guards.
// The benign variant deletes OMITBAD blocks whole and unwraps OMITGOOD
// blocks; the vulnerable variant mirrors that. Nested directives inside a
// guard are preserved. Throws UNBALANCED_GUARDS on an unterminated guard.
JulietSplit split_juliet_c(std::string_view source);

// Java variant: functions are located by name keywords rather than guards.
// The vulnerable sample deletes good-named methods, the benign one deletes
// bad-named methods.
JulietSplit split_juliet_java(std::string_view source);

// Comment removal, leak-keyword renaming (good/bad/cwe/G2B identifiers),
// namespace normalization and string-literal scrubbing. Renaming is
// consistent within one sample; Java replacements are exactly 7 lowercase
// letters.
std::string obfuscate(std::string_view source, Language language, std::uint64_t seed);

struct SanitizerReport {
    std::string raw_text;
};

// Substring rules, checked in order: use+free -> CWE-416,
// overflow+write -> CWE-787, overflow+read -> CWE-125.
std::optional<std::string> infer_cwe_from_sanitizer(const SanitizerReport& report);

struct SampleLabel {
    bool vulnerable = false;
    std::optional<std::string> cwe;
};

// ARVO-style project sample: stack-trace functions as context, patch
// functions as the target. Throws EMPTY_TARGET.
Sample build_project_sample(const std::vector<FunctionRecord>& stack_trace_fns,
                            const std::vector<FunctionRecord>& patch_fns,
                            const SampleLabel& label);

struct DedupResult {
    std::vector<Sample> kept;
    // (dropped sample id, earlier sample id that shares an n-gram)
    std::vector<std::pair<std::string, std::string>> dropped;
};

// First-seen-wins n-gram dedup at n tokens (default 20); a later sample
// sharing any n-gram with an earlier kept one is dropped.
DedupResult dedup(const std::vector<Sample>& samples, int n = 20);

// Cross-set mode: drops from `samples` anything sharing an n-gram with
// `reference` (protects the reference set), then dedups what remains.
DedupResult dedup_against(const std::vector<Sample>& samples,
                          const std::vector<Sample>& reference, int n = 20);

struct SufficiencyResult {
    bool sufficient = false;
    std::vector<std::string> needed; // function names the model asked for
};

// Context-sufficiency check via the assessment prompt; a parse failure is
// conservatively insufficient.
SufficiencyResult check_context_sufficiency(const Sample& sample, Gateway& gateway,
                                            const GenerationParams& params);

// Splits a project-scale sample's code at its markers; function-scale
// samples yield an empty context.
std::pair<std::string, std::string> split_context_markers(std::string_view code);

} // namespace vulnscout
