#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascades/assembly.hpp"
#include "cascades/core.hpp"
#include "cascades/costmodel.hpp"
#include "cascades/executor.hpp"
#include "cascades/guarantees.hpp"
#include "cascades/providers.hpp"
#include "cascades/restructure.hpp"
#include "cascades/surrogate.hpp"
#include "cascades/thresholds.hpp"

namespace cascades {

// The user-facing classification task: one operation prompt plus the legal
// output classes.
struct TaskSpec {
    std::string operation_text;
    ClassSet classes;

    OperationPrompt original_op() const;  // id "op_orig"

    static TaskSpec from_json_text(const std::string& text);
};

// Self-contained, versioned optimization output: everything needed to run
// the cascade on new documents given providers.
struct CascadeArtifact {
    int version = 1;
    RunConfig config;
    TaskSpec task;
    std::vector<OperationPrompt> operations;  // original + surrogates
    std::optional<RelevanceModel> relevance;
    Cascade cascade;               // certified thresholds when guaranteed
    std::vector<Task> base_tasks;  // pre-certification thresholds
    bool guarantee_requested = false;
    bool guarantee_found = false;
    int shift = 0;
    std::uint64_t split_seed = 0;
    std::vector<std::string> validation_order;
    std::vector<std::string> dev_doc_ids;
    Money dev_cost;
    double dev_accuracy = 0.0;
    OptCostReport opt_cost;

    // Round-trips byte-identically: serialize(deserialize(s)) == s for any
    // s this writer produced.
    std::string to_json_text() const;
    static CascadeArtifact from_json_text(const std::string& text);
};

struct OptimizeResult {
    CascadeArtifact artifact;
    EvalReport dev_report;
};

// Full optimization: seeded dev sampling, oracle labeling, document
// restructuring (when an embedder model is configured), the surrogate
// agentic loop (when an agent model is configured), and optional
// certification. Throws std::invalid_argument on config violations
// (including guarantee with |D_dev| < 2 * 75) and ProviderError when a
// provider stays unreachable.
OptimizeResult optimize(const std::vector<Document>& corpus, const TaskSpec& task,
                        const RunConfig& cfg, Provider& provider);

// Per-class smallest proxy threshold such that proxy exits at or above it
// plus oracle answers below it reach `alpha` combined accuracy on the dev
// set; +inf when no value works.
Task baseline_two_model(const TaskConfig& proxy_config,
                        const CandidateScoreTable& table,
                        const std::vector<std::string>& dev_doc_ids,
                        const std::vector<ClassLabel>& output_classes,
                        double alpha);

// ---------------------------------------------------------------------------
// Simulation scenarios: a synthetic corpus, a scripted provider fixture,
// and an alpha grid, swept for both methods.

struct Scenario {
    std::vector<Document> corpus;
    TaskSpec task;
    RunConfig config;
    std::string fixture_json;  // ScriptedProvider fixture
    std::vector<double> alpha_grid;

    // Throws std::invalid_argument naming the offending field.
    static Scenario from_json_text(const std::string& text);
};

struct SweepRow {
    double alpha = 0.0;
    std::string method;  // "task_cascade" | "two_model_baseline"
    Money total_cost;
    double mean_cost_usd = 0.0;
    double accuracy = 0.0;
};

// One optimize + evaluate per alpha per method. A fresh scripted provider
// is built per run so reply sequences replay identically.
std::vector<SweepRow> simulate_sweep(const Scenario& scenario);

// Header "alpha,method,total_cost_pico,mean_cost_usd,accuracy".
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace cascades
