#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vulnscout/callgraph.hpp"
#include "vulnscout/model_gateway.hpp"
#include "vulnscout/source_index.hpp"

namespace vulnscout {

struct ContextBundle {
    FunctionRecord target;
    std::vector<FunctionRecord> initial_context; // entry-to-target order, deduplicated
    std::vector<FunctionRecord> retrieved;       // tool-fetched, in response order
    std::size_t token_estimate = 0;
};

struct RetrievalBudget {
    int max_rounds = 8;
    int rounds_used = 0;
};

inline constexpr const char* kToolSuccessPrefix = "[SUCCESS]: [File: ";
inline constexpr const char* kToolFailureNotFound = "[FAILURE]: function not found";
inline constexpr const char* kToolFailureBadArgs = "[FAILURE]: malformed arguments";

// Instruction appended once the round budget is exhausted.
inline constexpr const char* kConcludeInstruction =
    "You have reached the tool call limit. Do not request any more tools. "
    "Conclude your analysis from the information you already have and finish "
    "with the required final answer block.";

// Unions the intermediate functions of all paths (the target itself is
// excluded), ordered by first appearance, dropping trailing functions that
// would push the estimate past budget_tokens.
ContextBundle assemble_initial_context(const FunctionRecord& target,
                                       const std::vector<CallPath>& paths,
                                       const ProjectIndex& index,
                                       std::size_t budget_tokens);

// Body of the tool response for a get_function_definition request.
std::string render_tool_response(const ProjectIndex& index, const std::string& func_name);

struct ToolLoopResult {
    std::optional<Verdict> verdict; // nullopt = abstention (unparseable answer)
    ContextBundle bundle;
    RetrievalBudget budget;
    std::vector<ChatMessage> transcript;
    std::string session;
};

// Detection loop: prompt, serve get_function_definition rounds up to
// budget.max_rounds, then force a conclusion with tools disabled.
// Throws FORCED_CONCLUSION_FAILED when a truncated answer cannot be forced
// into the grammar.
ToolLoopResult run_tool_loop(ContextBundle bundle, const ProjectIndex& index,
                             Gateway& gateway, const GenerationParams& params,
                             RetrievalBudget budget,
                             const std::vector<std::string>& policy = {},
                             const std::string& session = "");

} // namespace vulnscout
