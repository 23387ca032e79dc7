#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascades/assembly.hpp"
#include "cascades/core.hpp"
#include "cascades/executor.hpp"
#include "cascades/providers.hpp"
#include "cascades/restructure.hpp"
#include "cascades/thresholds.hpp"

namespace cascades {

struct SurrogateProposal {
    std::string prompt_text;
    std::string rationale;
    int round_index = 0;
    std::vector<ClassLabel> output_classes;  // parsed or inherited
    bool allows_abstain = false;
};

struct TaskStat {
    TaskConfig config;
    bool selected = false;
    long coverage = 0;
    std::vector<std::string> hard_examples;  // <= 10 near-threshold misses
};

struct AgentContext {
    const OperationPrompt* original_op = nullptr;
    std::vector<std::string> failure_snippets;  // oracle-extracted spans
    std::vector<TaskStat> task_stats;
    std::vector<std::string> prior_proposals;
};

// Instantiates the fixed agent prompt template: detection-type menu, TASK,
// FAILURE CASES, TASK STATISTICS, INSTRUCTIONS, output-format contract.
std::string build_agent_prompt(const AgentContext& ctx, int n_s);

// Accepts both "SURROGATE PROMPT:" and "PROMPT:" markers; every prompt must
// be followed by a RATIONALE before the next prompt, else the block is
// skipped. Output classes are the original classes mentioned verbatim in
// the prompt text (plus abstain when "-1" appears); none mentioned means
// the full set is inherited. Throws when nothing parses.
std::vector<SurrogateProposal> parse_proposals(const std::string& agent_text,
                                               const ClassSet& classes,
                                               int round_index);

struct Rejection {
    std::string reason;
};

// Subset rule plus exact-duplicate check against registered operations.
// Binary tasks never admit abstain; multiclass tasks admit it.
std::optional<Rejection> validate_proposal(const SurrogateProposal& proposal,
                                           const ClassSet& classes,
                                           const std::vector<OperationPrompt>& registered);

struct AgenticLoopConfig {
    double alpha = 0.9;
    double g = 0.10;
    int n_s = 5;
    int n_a = 3;
    bool lite = false;  // score surrogate candidates with the proxy only
    std::vector<double> fractions = {0.1, 0.25, 0.5, 1.0};
    long snippet_token_budget = 400;  // per failure doc
    int max_failure_docs = 8;
};

struct AgenticLoopResult {
    AssembledCascade final_cascade;
    std::vector<OperationPrompt> operations;  // original + accepted surrogates
    std::vector<TaskConfig> all_configs;
    int rounds_run = 0;
    std::vector<std::string> transcripts;  // one agent reply per round
};

// Full surrogate refinement loop: assemble, collect context, elicit and
// validate proposals, score the expanded candidate set, and stop early when
// a round yields no cost improvement. `world` and `table` are extended in
// place with accepted surrogates and their scores.
AgenticLoopResult agentic_loop(
    const std::vector<PreparedDocument>& dev_docs, WorldIndex& world,
    CandidateScoreTable& table, const ClassSet& classes,
    const OperationPrompt& original_op, const TaskConfig& oracle_config,
    Provider& provider, const std::optional<ModelRef>& agent_model,
    const std::vector<std::string>& proxy_models, const TokenCounter& counter,
    const AgenticLoopConfig& cfg,
    // Oracle used for failure-snippet extraction; null disables snippets.
    const ModelRef* snippet_oracle = nullptr,
    const std::map<std::string, StandardizedDocument>* standardized = nullptr);

}  // namespace cascades
