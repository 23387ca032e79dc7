#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascades/core.hpp"
#include "cascades/costmodel.hpp"
#include "cascades/providers.hpp"

namespace cascades {

// Thrown on transport failure after bounded retries.
struct ProviderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lookup tables for the models and operations a cascade references.
struct WorldIndex {
    std::map<std::string, ModelRef> models;
    std::map<std::string, OperationPrompt> ops;

    const ModelRef& model(const std::string& name) const;
    const OperationPrompt& op(const std::string& id) const;
    void add(const ModelRef& m) { models[m.name] = m; }
    void add(const OperationPrompt& o) { ops[o.id] = o; }
};

// Score source abstraction: live providers during optimization/inference,
// a precomputed score table during assembly (no fresh provider calls).
class Scorer {
  public:
    virtual ~Scorer() = default;
    virtual ScoredPrediction score_task(const TaskConfig& config,
                                        const PreparedDocument& doc) = 0;
};

class ProviderScorer : public Scorer {
  public:
    ProviderScorer(Provider& provider, const WorldIndex& world, TokenCounter counter)
        : provider_(provider), world_(world), counter_(std::move(counter)) {}

    ScoredPrediction score_task(const TaskConfig& config,
                                const PreparedDocument& doc) override;

  private:
    Provider& provider_;
    const WorldIndex& world_;
    TokenCounter counter_;
};

struct StageRecord {
    TaskConfig config;
    ScoredPrediction prediction;
    CostBreakdown cost;
};

struct DocResult {
    std::string doc_id;
    int exit_stage = 0;  // 1-based; oracle = tasks.size() + 1
    ClassLabel prediction;
    std::vector<StageRecord> stages;
    Money total_cost;
    bool failed = false;  // provider unavailable mid-cascade
};

// Evaluates stages in order; a document exits at the first stage where
// confidence >= tau for the predicted class (abstain never exits). The
// terminal oracle stage always accepts.
DocResult run_cascade(const Cascade& cascade, const PreparedDocument& doc,
                      Scorer& scorer, const WorldIndex& world,
                      const TokenCounter& counter,
                      bool include_output_cost = false);

struct StageSummary {
    int stage = 0;  // 1-based
    long coverage = 0;
    // Accuracy over the docs exiting here; absent when coverage == 0.
    std::optional<double> accuracy;
};

struct EvalReport {
    double overall_accuracy = 0.0;  // vs oracle labels, over non-failed docs
    std::vector<StageSummary> stages;
    Money total_cost;
    double mean_cost_usd = 0.0;
    long n_docs = 0;
    long n_failed = 0;
    std::vector<DocResult> traces;

    std::string to_json_text() const;
};

EvalReport evaluate(const Cascade& cascade, std::span<const PreparedDocument> docs,
                    const std::map<std::string, ClassLabel>& oracle_labels,
                    Scorer& scorer, const WorldIndex& world,
                    const TokenCounter& counter, bool include_output_cost = false);

// One line-delimited JSON audit row.
std::string doc_result_to_json(const DocResult& r);

}  // namespace cascades
