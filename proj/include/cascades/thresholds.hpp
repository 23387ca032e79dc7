#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascades/core.hpp"
#include "cascades/executor.hpp"
#include "cascades/providers.hpp"

namespace cascades {

// Predictions for every retained (task config, document) pair on the dev
// set, plus the oracle label per document. Shared by threshold selection,
// assembly, and certification so no stage re-queries providers.
class CandidateScoreTable {
  public:
    void put(const TaskConfig& config, const std::string& doc_id,
             ScoredPrediction pred);
    const ScoredPrediction& get(const TaskConfig& config,
                                const std::string& doc_id) const;
    bool has(const TaskConfig& config, const std::string& doc_id) const;

    void set_gold(const std::string& doc_id, ClassLabel label);
    const ClassLabel& gold(const std::string& doc_id) const;
    const std::map<std::string, ClassLabel>& gold_labels() const { return gold_; }

  private:
    std::map<std::string, ScoredPrediction> scores_;  // key | doc_id
    std::map<std::string, ClassLabel> gold_;
};

// Scorer backed by the table; assembly uses this so candidate trials make
// no fresh provider calls.
class TableScorer : public Scorer {
  public:
    explicit TableScorer(const CandidateScoreTable& table) : table_(table) {}
    ScoredPrediction score_task(const TaskConfig& config,
                                const PreparedDocument& doc) override {
        return table_.get(config, doc.id);
    }

  private:
    const CandidateScoreTable& table_;
};

// Per-class minimal-threshold selection with the coverage gate g: for each
// class, the lowest observed confidence t such that docs predicted as that
// class with confidence >= t are non-empty and at least alpha-accurate;
// +inf when no t works. The task is retained iff the classes' threshold
// sets jointly cover >= g * |dev|.
std::optional<Task> find_thresholds(const TaskConfig& config,
                                    const CandidateScoreTable& table,
                                    const std::vector<std::string>& dev_doc_ids,
                                    const std::vector<ClassLabel>& output_classes,
                                    double alpha, double g);

}  // namespace cascades
