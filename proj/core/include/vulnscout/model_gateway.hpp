#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vulnscout {

enum class Role { system, user, assistant, tool };

const char* role_name(Role role);

struct ToolCall {
    std::string name;
    std::string arguments; // raw JSON text
};

struct ChatMessage {
    Role role = Role::user;
    std::string content;
    std::optional<ToolCall> tool_call;      // assistant messages only
    std::optional<std::string> tool_result; // tool messages only
};

struct GenerationParams {
    int max_output_tokens = 8192;
    int reasoning_budget_tokens = 0; // 0 = no reasoning budget set
    double temperature = 0.0;
    std::optional<std::uint64_t> seed;
};

struct Verdict {
    bool judge = false;
    std::optional<std::string> cwe; // "CWE-<digits>", present iff judge
    std::string raw_text;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::string arg_name; // single string argument
};

// The function-lookup tool the detection loop exposes to the model.
ToolSpec function_lookup_tool();

struct Completion {
    std::string text;
    std::optional<ToolCall> tool_call;
    int output_tokens = 0;
    bool truncated = false; // generation hit max_output_tokens
};

// Answer block header; the parser also accepts the header without the space.
inline constexpr const char* kFinalAnswerHeader = "## Final Answer";

// Detection prompt. With context, the code block becomes
// "// context\n<context>\n// target function\n<snippet>"; with a policy, a
// constraint restricting #type to the listed CWEs is appended.
std::string render_detection_prompt(std::string_view snippet,
                                    std::optional<std::string_view> context = std::nullopt,
                                    const std::vector<std::string>& policy = {});

// Context-sufficiency assessment prompt (#judge / #function grammar).
std::string render_context_assessment_prompt(std::string_view context,
                                              std::string_view snippet);

// Parses the last final-answer block. nullopt = PARSE_FAILURE (no block,
// judge unreadable, or judge=yes without exactly one CWE); callers treat it
// as an abstention.
std::optional<Verdict> parse_verdict(std::string_view text);

// Lenient candidate extraction for policy generation: every CWE mentioned in
// the #type line of the last answer block, provided judge=yes.
std::vector<std::string> parse_policy_candidates(std::string_view text);

// "CWE-<digits>" canonical spelling, e.g. "cwe 79" -> "CWE-79".
std::optional<std::string> normalize_cwe(std::string_view raw);

class Backend {
public:
    virtual ~Backend() = default;
    virtual Completion generate(const std::vector<ChatMessage>& messages,
                                const GenerationParams& params,
                                const std::vector<ToolSpec>& tools) = 0;
    virtual std::string id() const = 0;
};

std::uint64_t request_fingerprint(const std::vector<ChatMessage>& messages);

// Deterministic scripted backend. A script maps request fingerprints (hash of
// the last user message) or content substrings to ordered responses; a
// default queue serves unmatched requests. Responses repeat their final entry
// once exhausted.
class MockBackend : public Backend {
public:
    struct Response {
        std::string text;
        std::optional<ToolCall> tool_call;
        std::optional<int> tokens; // overrides the approximate count
    };

    MockBackend() = default;
    static std::shared_ptr<MockBackend> from_script(const std::filesystem::path& path);
    static std::shared_ptr<MockBackend> from_json(const nlohmann::json& script);

    void add_rule_contains(std::string needle, std::vector<Response> responses);
    void add_rule_fingerprint(std::string hex, std::vector<Response> responses);
    void push_default(Response response);

    Completion generate(const std::vector<ChatMessage>& messages,
                        const GenerationParams& params,
                        const std::vector<ToolSpec>& tools) override;
    std::string id() const override { return "mock"; }

    int request_count() const;

private:
    struct Rule {
        std::string contains;    // empty unless substring rule
        std::string fingerprint; // empty unless fingerprint rule
        std::vector<Response> responses;
        std::size_t next = 0;
    };
    Completion to_completion(const Response& r, const GenerationParams& params) const;

    mutable std::mutex mu_;
    std::vector<Rule> rules_;
    std::vector<Response> default_;
    std::size_t default_next_ = 0;
    int requests_ = 0;
};

// Chat-completions HTTP client (plain http). Base URL and auth token default
// to VULNSCOUT_API_BASE / VULNSCOUT_API_KEY. Retries 5xx and transport errors
// with exponential backoff, three times, then throws BACKEND_TIMEOUT.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(std::string base_url = "", std::string api_key = "",
                         std::string model = "");
    Completion generate(const std::vector<ChatMessage>& messages,
                        const GenerationParams& params,
                        const std::vector<ToolSpec>& tools) override;
    std::string id() const override { return "http:" + base_url_; }

    void set_retry_base_delay_ms(int ms) { retry_base_delay_ms_ = ms; }

private:
    std::string base_url_;
    std::string api_key_;
    std::string model_;
    int retry_base_delay_ms_ = 500;
};

// "mock:<script.json>", an http(s) URL, or "env".
std::shared_ptr<Backend> make_backend(std::string_view spec);

struct TraceEntry {
    std::string session;
    std::uint64_t seq = 0;
    std::vector<ChatMessage> request;
    Completion response;
};

// Append-only; concurrent appends keep per-session order.
class TraceLog {
public:
    void append(std::string session, std::vector<ChatMessage> request, Completion response);
    std::vector<TraceEntry> entries() const;
    // Conversation reconstruction for a session: the request of the last
    // entry plus its response, which replays byte-identically.
    std::vector<ChatMessage> replay(const std::string& session) const;
    nlohmann::ordered_json to_json() const;

private:
    mutable std::mutex mu_;
    std::vector<TraceEntry> entries_;
    std::uint64_t next_seq_ = 0;
};

// Backend wrapper enforcing output budgets, recording traces, and bounding
// in-flight requests.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<Backend> backend, int max_in_flight = 8);

    Completion complete(const std::vector<ChatMessage>& messages,
                        const GenerationParams& params,
                        const std::vector<ToolSpec>& tools = {},
                        const std::string& session = "");

    // Truncated generation: cap reasoning at params.reasoning_budget_tokens;
    // when the budget is consumed without a final-answer header, splice the
    // header in and request a short (64-token) conclusion.
    // Throws FORCED_CONCLUSION_FAILED when the forced text stays unparseable.
    std::string truncated_complete(const std::vector<ChatMessage>& messages,
                                   const GenerationParams& params,
                                   const std::string& session = "");

    Backend& backend() { return *backend_; }
    TraceLog& trace() { return trace_; }

private:
    std::shared_ptr<Backend> backend_;
    TraceLog trace_;
    std::mutex mu_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    int max_in_flight_;
};

} // namespace vulnscout
