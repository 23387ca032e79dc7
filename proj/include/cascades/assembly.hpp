#pragma once

#include <span>
#include <string>
#include <vector>

#include "cascades/core.hpp"
#include "cascades/executor.hpp"
#include "cascades/thresholds.hpp"

namespace cascades {

struct AssemblyInputs {
    const std::vector<PreparedDocument>* docs = nullptr;
    const std::map<std::string, ClassLabel>* gold = nullptr;
    const CandidateScoreTable* table = nullptr;
    const WorldIndex* world = nullptr;
    TokenCounter counter;
    double alpha = 0.9;
    bool include_output_cost = false;
};

struct AssembledCascade {
    Cascade cascade;
    Money dev_cost;  // total cost on the dev set
};

// Greedy tail-append assembly: starting from the oracle-only cascade, each
// round appends the unused candidate giving the cheapest dev-set cost among
// candidates whose every task keeps accuracy >= alpha on the documents it
// classifies. Stops when no append lowers cost. Ties break toward the
// earlier candidate index.
AssembledCascade greedy_assemble(std::span<const Task> candidates,
                                 const TaskConfig& oracle_config,
                                 const AssemblyInputs& in);

// Test oracle: evaluates every ordering of every subset of candidates.
// Guarded to |candidates| <= max_tasks <= 7.
AssembledCascade exhaustive_assemble(std::span<const Task> candidates,
                                     const TaskConfig& oracle_config,
                                     const AssemblyInputs& in, int max_tasks);

// ---------------------------------------------------------------------------
// Min-Sum-Set-Cover reduction harness (testing only).

struct MsscInstance {
    std::vector<std::string> universe;
    std::vector<std::vector<std::string>> sets;

    static MsscInstance from_json_text(const std::string& text);
};

// A self-contained cascade-construction problem induced by the reduction:
// one document per item; one unit-cost task per set predicting True with
// confidence 1 on covered items, 0.5 otherwise; document tokens free;
// oracle priced effectively infinite; alpha = 1.
struct ReducedMssc {
    std::vector<PreparedDocument> docs;
    std::map<std::string, ClassLabel> gold;  // all "True"
    WorldIndex world;
    CandidateScoreTable table;
    std::vector<Task> candidates;  // one per set, in instance order
    TaskConfig oracle_config;
    TokenCounter counter;

    AssemblyInputs inputs(double alpha = 1.0) const;
};

ReducedMssc reduce_mssc(const MsscInstance& instance);

// Independent MSSC objective brute force over permutations of all sets;
// returns the minimum sum over items of the earliest covering position.
long mssc_brute_force(const MsscInstance& instance);

}  // namespace cascades
