#include "vulnscout/context_retriever.hpp"

#include <set>

#include "vulnscout/error.hpp"
#include "vulnscout/text.hpp"

namespace vulnscout {

ContextBundle assemble_initial_context(const FunctionRecord& target,
                                       const std::vector<CallPath>& paths,
                                       const ProjectIndex& index,
                                       std::size_t budget_tokens) {
    ContextBundle bundle;
    bundle.target = target;

    std::vector<const FunctionRecord*> ordered;
    std::set<std::string> seen;
    for (const CallPath& path : paths) {
        for (const std::string& node : path.nodes) {
            if (node == target.qualified_name) continue;
            if (!seen.insert(node).second) continue;
            const FunctionRecord* rec = index.by_qualified_name(node);
            if (rec) ordered.push_back(rec);
        }
    }

    std::size_t total = 0;
    for (const FunctionRecord* rec : ordered) {
        std::size_t cost = approx_token_count(rec->source_text);
        if (total + cost > budget_tokens) break; // drop this and everything after
        total += cost;
        bundle.initial_context.push_back(*rec);
    }
    bundle.token_estimate = total;
    return bundle;
}

std::string render_tool_response(const ProjectIndex& index, const std::string& func_name) {
    std::vector<const FunctionRecord*> defs = get_function_definition(index, func_name);
    if (defs.empty()) return kToolFailureNotFound;
    std::string out;
    for (const FunctionRecord* rec : defs) {
        if (!out.empty()) out += '\n';
        out += kToolSuccessPrefix;
        out += rec->file;
        out += "]\n";
        out += rec->source_text;
    }
    return out;
}

namespace {

std::string context_text(const ContextBundle& bundle) {
    std::string out;
    for (const FunctionRecord& rec : bundle.initial_context) {
        if (!out.empty()) out += "\n\n";
        out += rec.source_text;
    }
    return out;
}

std::optional<std::string> parse_func_name_arg(const std::string& arguments) {
    try {
        nlohmann::json j = nlohmann::json::parse(arguments);
        if (j.is_object() && j.contains("func_name") && j.at("func_name").is_string())
            return j.at("func_name").get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    return std::nullopt;
}

} // namespace

ToolLoopResult run_tool_loop(ContextBundle bundle, const ProjectIndex& index,
                             Gateway& gateway, const GenerationParams& params,
                             RetrievalBudget budget,
                             const std::vector<std::string>& policy,
                             const std::string& session) {
    ToolLoopResult result;
    result.session = session.empty() ? bundle.target.qualified_name : session;

    std::string ctx = context_text(bundle);
    std::string prompt = render_detection_prompt(
        bundle.target.source_text,
        ctx.empty() ? std::nullopt : std::optional<std::string_view>(ctx), policy);

    std::vector<ChatMessage> messages;
    messages.push_back({Role::user, prompt, std::nullopt, std::nullopt});

    std::vector<ToolSpec> tools{function_lookup_tool()};
    bool tools_enabled = true;

    GenerationParams round_params = params;
    if (params.reasoning_budget_tokens > 0 &&
        params.reasoning_budget_tokens < params.max_output_tokens)
        round_params.max_output_tokens = params.reasoning_budget_tokens;

    for (;;) {
        Completion c = gateway.complete(messages, round_params,
                                        tools_enabled ? tools : std::vector<ToolSpec>{},
                                        result.session);
        if (c.tool_call && tools_enabled) {
            ChatMessage call_msg;
            call_msg.role = Role::assistant;
            call_msg.content = c.text;
            call_msg.tool_call = c.tool_call;
            messages.push_back(call_msg);

            std::string response;
            if (c.tool_call->name != function_lookup_tool().name) {
                response = kToolFailureBadArgs;
            } else if (auto name = parse_func_name_arg(c.tool_call->arguments)) {
                response = render_tool_response(index, *name);
                if (response.rfind(kToolSuccessPrefix, 0) == 0) {
                    for (const FunctionRecord* rec : get_function_definition(index, *name))
                        bundle.retrieved.push_back(*rec);
                }
            } else {
                response = kToolFailureBadArgs;
            }

            ChatMessage tool_msg;
            tool_msg.role = Role::tool;
            tool_msg.content = response;
            tool_msg.tool_result = response;
            messages.push_back(tool_msg);

            ++budget.rounds_used;
            if (budget.rounds_used >= budget.max_rounds) {
                // resend with tools disabled and the instruction to conclude
                messages.push_back({Role::user, kConcludeInstruction, std::nullopt,
                                    std::nullopt});
                tools_enabled = false;
            }
            continue;
        }
        if (c.tool_call && !tools_enabled) {
            // the model ignored the conclude instruction; abstain
            result.verdict = std::nullopt;
            break;
        }

        std::string answer = c.text;
        bool needs_forcing = params.reasoning_budget_tokens > 0 && c.truncated &&
                             answer.find("Final Answer") == std::string::npos;
        if (needs_forcing) {
            std::string forcing = answer + "\n" + kFinalAnswerHeader + "\n";
            std::vector<ChatMessage> forced = messages;
            forced.push_back({Role::assistant, forcing, std::nullopt, std::nullopt});
            GenerationParams cont = params;
            cont.max_output_tokens = 64;
            cont.reasoning_budget_tokens = 0;
            Completion tail = gateway.complete(forced, cont, {}, result.session);
            answer = forcing + tail.text;
            if (!parse_verdict(answer))
                throw Error(Errc::forced_conclusion_failed, bundle.target.qualified_name);
        }

        ChatMessage final_msg;
        final_msg.role = Role::assistant;
        final_msg.content = answer;
        messages.push_back(final_msg);
        result.verdict = parse_verdict(answer);
        break;
    }

    result.bundle = std::move(bundle);
    result.budget = budget;
    result.transcript = std::move(messages);
    return result;
}

} // namespace vulnscout
