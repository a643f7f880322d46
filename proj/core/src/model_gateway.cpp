#include "vulnscout/model_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "vulnscout/error.hpp"
#include "vulnscout/text.hpp"

namespace vulnscout {

const char* role_name(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
    }
    return "user";
}

ToolSpec function_lookup_tool() {
    return {"get_function_definition",
            "Retrieve the implementation of a function by its name.",
            "func_name"};
}

// ---------------------------------------------------------------------------
// prompt templates
// ---------------------------------------------------------------------------

namespace {

const char* kDetectionTemplateHead =
    "You are an advanced vulnerability detection model. "
    "Your task is to check if a specific vulnerability exists in a given piece of code. "
    "The code may contain a long context, which is the stack trace of the function. "
    "They are separated by \"// context\" and \"// target function\". "
    "You need to output whether the target function is vulnerable and the type of "
    "vulnerability present with cwe id (CWE-xx).\n"
    "\n"
    "You are given the following code snippet:\n";

const char* kDetectionTemplateTail =
    "\n"
    "You should STRICTLY structure your response as follows:\n"
    "\n"
    "## Final Answer\n"
    "#judge: <yes/no>\n"
    "#type: <vulnerability type>\n"
    "\n"
    "Additional Constraint:\n"
    "If `#judge: yes`, then `#type:` must contain exactly one CWE.\n"
    "If `#judge: yes`, the model must output only the most probable CWE related to the "
    "given code snippet.\n"
    "\n"
    "Example\n"
    "\n"
    "If the target function is vulnerable to a CWE-79, you should finally output:\n"
    "## Final Answer\n"
    "#judge: yes\n"
    "#type: CWE-79\n"
    "\n"
    "If the target function does not contain vulnerabilities related to the given CWE, "
    "you should finally output:\n"
    "## Final Answer\n"
    "#judge: no\n"
    "#type: N/A\n";

const char* kContextAssessmentHead =
    "You are an advanced vulnerability detection model. "
    "Your task is to analyze whether the provided context is sufficient to make a "
    "vulnerability determination in the target function. "
    "Specifically, you need to check whether the provided context contains enough "
    "information to understand the data flow, security boundaries, and potential "
    "attack vectors.\n"
    "\n"
    "You are given the following context and code snippet:\n"
    "\n";

const char* kContextAssessmentTail =
    "\n"
    "You should STRICTLY structure your response as follows:\n"
    "\n"
    "## Final Answer\n"
    "#judge: <yes/no>\n"
    "#function: list of needed functions\n"
    "\n"
    "Examples:\n"
    "\n"
    "If the context is sufficient:\n"
    "## Final Answer\n"
    "#judge: yes\n"
    "#function: N/A\n"
    "\n"
    "If the context is insufficient:\n"
    "## Final Answer\n"
    "#judge: no\n"
    "#function: [a, b, c]\n";

} // namespace

std::string render_detection_prompt(std::string_view snippet,
                                    std::optional<std::string_view> context,
                                    const std::vector<std::string>& policy) {
    std::string code;
    if (context) {
        code = "// context\n";
        code += *context;
        code += "\n// target function\n";
        code += snippet;
    } else {
        code = std::string(snippet);
    }

    std::string prompt = kDetectionTemplateHead;
    prompt += code;
    prompt += '\n';
    prompt += kDetectionTemplateTail;

    if (!policy.empty()) {
        prompt += "\nPolicy Constraint:\n"
                  "The target function may only be judged vulnerable to one of the "
                  "following CWE candidates: ";
        for (std::size_t i = 0; i < policy.size(); ++i) {
            if (i) prompt += ", ";
            prompt += policy[i];
        }
        prompt += ". If `#judge: yes`, `#type:` must be one of these candidates.\n";
    }
    return prompt;
}

std::string render_context_assessment_prompt(std::string_view context,
                                             std::string_view snippet) {
    std::string prompt = kContextAssessmentHead;
    prompt += "Context:\n";
    prompt += context;
    prompt += "\n\nTarget Function:\n";
    prompt += snippet;
    prompt += '\n';
    prompt += kContextAssessmentTail;
    return prompt;
}

// ---------------------------------------------------------------------------
// verdict grammar
// ---------------------------------------------------------------------------

namespace {

// Last "## Final Answer" block (a missing space after ## is tolerated);
// returns the text after the header, or nullopt.
std::optional<std::string_view> last_answer_block(std::string_view text) {
    const std::string_view needle = "Final Answer";
    std::size_t best = std::string_view::npos;
    std::size_t pos = 0;
    while (true) {
        std::size_t hit = text.find(needle, pos);
        if (hit == std::string_view::npos) break;
        std::size_t k = hit;
        while (k > 0 && (text[k - 1] == ' ' || text[k - 1] == '\t')) --k;
        if (k >= 2 && text[k - 1] == '#' && text[k - 2] == '#') best = hit + needle.size();
        pos = hit + needle.size();
    }
    if (best == std::string_view::npos) return std::nullopt;
    return text.substr(best);
}

// Value of "#<field>:" within the block, up to end of line.
std::optional<std::string> field_value(std::string_view block, std::string_view field) {
    std::string tag = "#" + std::string(field);
    std::size_t pos = 0;
    while (true) {
        std::size_t hit = block.find(tag, pos);
        if (hit == std::string_view::npos) return std::nullopt;
        std::size_t after = hit + tag.size();
        // allow optional spaces before the colon
        while (after < block.size() && (block[after] == ' ' || block[after] == '\t')) ++after;
        if (after < block.size() && block[after] == ':') {
            ++after;
            std::size_t eol = block.find('\n', after);
            std::string_view value = block.substr(
                after, eol == std::string_view::npos ? block.size() - after : eol - after);
            return trim(value);
        }
        pos = hit + 1;
    }
}

std::vector<std::string> extract_cwes(std::string_view text) {
    std::vector<std::string> out;
    std::string lower = to_lower(text);
    std::size_t pos = 0;
    while ((pos = lower.find("cwe", pos)) != std::string::npos) {
        std::size_t k = pos + 3;
        while (k < lower.size() && (lower[k] == '-' || lower[k] == ' ' || lower[k] == '_'))
            ++k;
        std::size_t digits_start = k;
        while (k < lower.size() && std::isdigit(static_cast<unsigned char>(lower[k]))) ++k;
        if (k > digits_start)
            out.push_back("CWE-" + std::string(lower.substr(digits_start, k - digits_start)));
        pos = k;
    }
    return out;
}

} // namespace

std::optional<std::string> normalize_cwe(std::string_view raw) {
    std::vector<std::string> found = extract_cwes(raw);
    if (found.size() == 1) return found[0];
    // bare number also accepted
    std::string t = trim(raw);
    if (!t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c));
        }))
        return "CWE-" + t;
    return std::nullopt;
}

std::optional<Verdict> parse_verdict(std::string_view text) {
    auto block = last_answer_block(text);
    if (!block) return std::nullopt;

    auto judge_raw = field_value(*block, "judge");
    if (!judge_raw) return std::nullopt;
    std::string judge_l = to_lower(*judge_raw);
    bool yes = judge_l.rfind("yes", 0) == 0;
    bool no = judge_l.rfind("no", 0) == 0;
    if (yes == no) return std::nullopt;

    Verdict v;
    v.judge = yes;
    v.raw_text = std::string(text);
    if (!yes) return v; // any #type content is ignored for a benign judge

    auto type_raw = field_value(*block, "type");
    if (!type_raw) return std::nullopt;
    std::vector<std::string> cwes = extract_cwes(*type_raw);
    if (cwes.size() != 1) return std::nullopt; // zero, N/A, or more than one
    v.cwe = cwes[0];
    return v;
}

std::vector<std::string> parse_policy_candidates(std::string_view text) {
    auto block = last_answer_block(text);
    if (!block) return {};
    auto judge_raw = field_value(*block, "judge");
    if (!judge_raw || to_lower(*judge_raw).rfind("yes", 0) != 0) return {};
    auto type_raw = field_value(*block, "type");
    if (!type_raw) return {};
    std::vector<std::string> all = extract_cwes(*type_raw);
    std::vector<std::string> distinct;
    for (const std::string& c : all)
        if (std::find(distinct.begin(), distinct.end(), c) == distinct.end())
            distinct.push_back(c);
    return distinct;
}

// ---------------------------------------------------------------------------
// mock backend
// ---------------------------------------------------------------------------

std::uint64_t request_fingerprint(const std::vector<ChatMessage>& messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
        if (it->role == Role::user) return fnv1a(it->content);
    return fnv1a("");
}

std::shared_ptr<MockBackend> MockBackend::from_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot read mock script " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    return from_json(j);
}

namespace {

MockBackend::Response response_from_json(const nlohmann::json& j) {
    MockBackend::Response r;
    if (j.contains("text")) r.text = j.at("text").get<std::string>();
    if (j.contains("tokens")) r.tokens = j.at("tokens").get<int>();
    if (j.contains("tool_call")) {
        ToolCall tc;
        tc.name = j.at("tool_call").at("name").get<std::string>();
        const auto& args = j.at("tool_call").at("arguments");
        tc.arguments = args.is_string() ? args.get<std::string>() : args.dump();
        r.tool_call = tc;
    }
    return r;
}

} // namespace

std::shared_ptr<MockBackend> MockBackend::from_json(const nlohmann::json& script) {
    auto mock = std::make_shared<MockBackend>();
    if (script.contains("rules")) {
        for (const auto& rule : script.at("rules")) {
            std::vector<Response> responses;
            for (const auto& r : rule.at("responses")) responses.push_back(response_from_json(r));
            if (rule.contains("contains"))
                mock->add_rule_contains(rule.at("contains").get<std::string>(),
                                        std::move(responses));
            else if (rule.contains("fingerprint"))
                mock->add_rule_fingerprint(rule.at("fingerprint").get<std::string>(),
                                           std::move(responses));
            else
                throw Error(Errc::io, "mock rule needs 'contains' or 'fingerprint'");
        }
    }
    if (script.contains("default"))
        for (const auto& r : script.at("default")) mock->push_default(response_from_json(r));
    return mock;
}

void MockBackend::add_rule_contains(std::string needle, std::vector<Response> responses) {
    std::lock_guard lock(mu_);
    rules_.push_back({std::move(needle), "", std::move(responses), 0});
}

void MockBackend::add_rule_fingerprint(std::string hex, std::vector<Response> responses) {
    std::lock_guard lock(mu_);
    rules_.push_back({"", std::move(hex), std::move(responses), 0});
}

void MockBackend::push_default(Response response) {
    std::lock_guard lock(mu_);
    default_.push_back(std::move(response));
}

Completion MockBackend::to_completion(const Response& r, const GenerationParams& params) const {
    Completion c;
    c.text = r.text;
    c.tool_call = r.tool_call;
    c.output_tokens = r.tokens ? *r.tokens : static_cast<int>(approx_token_count(r.text));
    (void)params;
    return c;
}

Completion MockBackend::generate(const std::vector<ChatMessage>& messages,
                                 const GenerationParams& params,
                                 const std::vector<ToolSpec>& tools) {
    (void)tools;
    std::lock_guard lock(mu_);
    ++requests_;
    std::string last_user;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == Role::user) {
            last_user = it->content;
            break;
        }
    }
    std::string fp = hex64(fnv1a(last_user));
    for (Rule& rule : rules_) {
        bool match = (!rule.fingerprint.empty() && rule.fingerprint == fp) ||
                     (!rule.contains.empty() &&
                      last_user.find(rule.contains) != std::string::npos);
        if (!match) continue;
        const Response& r = rule.responses.at(std::min(rule.next, rule.responses.size() - 1));
        if (rule.next < rule.responses.size()) ++rule.next;
        return to_completion(r, params);
    }
    if (!default_.empty()) {
        const Response& r = default_.at(std::min(default_next_, default_.size() - 1));
        if (default_next_ < default_.size()) ++default_next_;
        return to_completion(r, params);
    }
    throw Error(Errc::malformed_response, "mock script has no response for request");
}

int MockBackend::request_count() const {
    std::lock_guard lock(mu_);
    return requests_;
}

// ---------------------------------------------------------------------------
// http backend
// ---------------------------------------------------------------------------

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

nlohmann::json message_to_wire(const ChatMessage& m) {
    nlohmann::json j;
    j["role"] = role_name(m.role);
    j["content"] = m.role == Role::tool && m.tool_result ? *m.tool_result : m.content;
    if (m.tool_call) {
        j["tool_calls"] = nlohmann::json::array(
            {{{"type", "function"},
              {"function",
               {{"name", m.tool_call->name}, {"arguments", m.tool_call->arguments}}}}});
    }
    return j;
}

} // namespace

HttpBackend::HttpBackend(std::string base_url, std::string api_key, std::string model)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)) {
    if (base_url_.empty()) base_url_ = env_or("VULNSCOUT_API_BASE", "");
    if (api_key_.empty()) api_key_ = env_or("VULNSCOUT_API_KEY", "");
    if (base_url_.empty())
        throw Error(Errc::usage, "no backend URL; set VULNSCOUT_API_BASE or pass --backend");
}

Completion HttpBackend::generate(const std::vector<ChatMessage>& messages,
                                 const GenerationParams& params,
                                 const std::vector<ToolSpec>& tools) {
    nlohmann::json body;
    if (!model_.empty()) body["model"] = model_;
    auto& msgs = body["messages"] = nlohmann::json::array();
    for (const ChatMessage& m : messages) msgs.push_back(message_to_wire(m));
    body["max_tokens"] = params.max_output_tokens;
    body["temperature"] = params.temperature;
    if (params.seed) body["seed"] = *params.seed;
    if (!tools.empty()) {
        auto& tj = body["tools"] = nlohmann::json::array();
        for (const ToolSpec& t : tools) {
            tj.push_back(
                {{"type", "function"},
                 {"function",
                  {{"name", t.name},
                   {"description", t.description},
                   {"parameters",
                    {{"type", "object"},
                     {"properties", {{t.arg_name, {{"type", "string"}}}}},
                     {"required", nlohmann::json::array({t.arg_name})}}}}}});
        }
    }

    // split base_url into host part and path prefix
    std::string url = base_url_;
    std::string prefix;
    std::size_t scheme = url.find("://");
    std::size_t slash = scheme == std::string::npos ? url.find('/')
                                                    : url.find('/', scheme + 3);
    if (slash != std::string::npos) {
        prefix = url.substr(slash);
        url = url.substr(0, slash);
    }
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    std::string path = prefix + "/chat/completions";

    httplib::Client client(url);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const int max_retries = 3;
    int delay_ms = retry_base_delay_ms_;
    httplib::Result res;
    for (int attempt = 0;; ++attempt) {
        res = client.Post(path, headers, body.dump(), "application/json");
        bool retryable = !res || res->status >= 500;
        if (!retryable) break;
        if (attempt + 1 >= max_retries)
            throw Error(Errc::backend_timeout,
                        "backend unavailable after " + std::to_string(max_retries) +
                            " attempts");
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        delay_ms *= 2;
    }
    if (res->status < 200 || res->status >= 300)
        throw Error(Errc::malformed_response,
                    "backend status " + std::to_string(res->status) + ": " + res->body);

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
        throw Error(Errc::malformed_response, e.what());
    }

    Completion c;
    try {
        const auto& choice = j.at("choices").at(0);
        const auto& msg = choice.at("message");
        if (msg.contains("content") && !msg.at("content").is_null())
            c.text = msg.at("content").get<std::string>();
        if (msg.contains("tool_calls") && msg.at("tool_calls").is_array() &&
            !msg.at("tool_calls").empty()) {
            const auto& f = msg.at("tool_calls").at(0).at("function");
            ToolCall tc;
            tc.name = f.at("name").get<std::string>();
            tc.arguments = f.at("arguments").is_string() ? f.at("arguments").get<std::string>()
                                                         : f.at("arguments").dump();
            c.tool_call = tc;
        }
        if (j.contains("usage") && j.at("usage").contains("completion_tokens"))
            c.output_tokens = j.at("usage").at("completion_tokens").get<int>();
        else
            c.output_tokens = static_cast<int>(approx_token_count(c.text));
        if (choice.contains("finish_reason") && choice.at("finish_reason") == "length")
            c.truncated = true;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::malformed_response, e.what());
    }
    return c;
}

std::shared_ptr<Backend> make_backend(std::string_view spec) {
    if (spec.rfind("mock:", 0) == 0)
        return MockBackend::from_script(std::filesystem::path(std::string(spec.substr(5))));
    if (spec == "env" || spec.empty()) return std::make_shared<HttpBackend>();
    return std::make_shared<HttpBackend>(std::string(spec));
}

// ---------------------------------------------------------------------------
// trace log + gateway
// ---------------------------------------------------------------------------

void TraceLog::append(std::string session, std::vector<ChatMessage> request,
                      Completion response) {
    std::lock_guard lock(mu_);
    entries_.push_back({std::move(session), next_seq_++, std::move(request),
                        std::move(response)});
}

std::vector<TraceEntry> TraceLog::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::vector<ChatMessage> TraceLog::replay(const std::string& session) const {
    std::lock_guard lock(mu_);
    std::vector<ChatMessage> convo;
    for (const TraceEntry& e : entries_) {
        if (e.session != session) continue;
        convo = e.request;
        ChatMessage reply;
        reply.role = Role::assistant;
        reply.content = e.response.text;
        reply.tool_call = e.response.tool_call;
        convo.push_back(std::move(reply));
    }
    return convo;
}

nlohmann::ordered_json TraceLog::to_json() const {
    std::lock_guard lock(mu_);
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const TraceEntry& e : entries_) {
        nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
        for (const ChatMessage& m : e.request) {
            nlohmann::ordered_json mj;
            mj["role"] = role_name(m.role);
            mj["content"] = m.content;
            if (m.tool_call)
                mj["tool_call"] = {{"name", m.tool_call->name},
                                   {"arguments", m.tool_call->arguments}};
            if (m.tool_result) mj["tool_result"] = *m.tool_result;
            msgs.push_back(std::move(mj));
        }
        nlohmann::ordered_json ej;
        ej["session"] = e.session;
        ej["seq"] = e.seq;
        ej["request"] = std::move(msgs);
        ej["response"] = {{"text", e.response.text},
                          {"output_tokens", e.response.output_tokens},
                          {"truncated", e.response.truncated}};
        if (e.response.tool_call)
            ej["response"]["tool_call"] = {{"name", e.response.tool_call->name},
                                           {"arguments", e.response.tool_call->arguments}};
        out.push_back(std::move(ej));
    }
    return out;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, int max_in_flight)
    : backend_(std::move(backend)), max_in_flight_(max_in_flight > 0 ? max_in_flight : 1) {}

Completion Gateway::complete(const std::vector<ChatMessage>& messages,
                             const GenerationParams& params,
                             const std::vector<ToolSpec>& tools,
                             const std::string& session) {
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
        ++in_flight_;
    }
    Completion c;
    try {
        c = backend_->generate(messages, params, tools);
    } catch (...) {
        std::lock_guard lock(mu_);
        --in_flight_;
        cv_.notify_one();
        throw;
    }
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();

    if (c.output_tokens > params.max_output_tokens) {
        c.text = truncate_to_tokens(c.text, static_cast<std::size_t>(params.max_output_tokens));
        c.output_tokens = params.max_output_tokens;
        c.truncated = true;
    }
    trace_.append(session, messages, c);
    return c;
}

std::string Gateway::truncated_complete(const std::vector<ChatMessage>& messages,
                                        const GenerationParams& params,
                                        const std::string& session) {
    int budget = params.reasoning_budget_tokens;
    if (budget <= 0 || budget >= params.max_output_tokens) {
        // degenerate budget: identical to complete
        return complete(messages, params, {}, session).text;
    }

    GenerationParams first_params = params;
    first_params.max_output_tokens = budget;
    Completion first = complete(messages, first_params, {}, session);
    if (first.text.find("Final Answer") != std::string::npos) return first.text;
    if (!first.truncated) return first.text; // concluded early without the header

    // budget consumed without an answer: splice the header and force a short
    // conclusion
    std::string forcing = first.text + "\n" + kFinalAnswerHeader + "\n";
    std::vector<ChatMessage> forced = messages;
    ChatMessage partial;
    partial.role = Role::assistant;
    partial.content = forcing;
    forced.push_back(std::move(partial));

    GenerationParams cont_params = params;
    cont_params.max_output_tokens = 64;
    cont_params.reasoning_budget_tokens = 0;
    Completion cont = complete(forced, cont_params, {}, session);

    std::string full = forcing + cont.text;
    if (!parse_verdict(full))
        throw Error(Errc::forced_conclusion_failed,
                    "no parseable answer after forced conclusion");
    return full;
}

} // namespace vulnscout
