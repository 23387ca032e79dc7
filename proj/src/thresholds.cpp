#include "cascades/thresholds.hpp"

#include <algorithm>
#include <cmath>

namespace cascades {

namespace {
std::string table_key(const TaskConfig& config, const std::string& doc_id) {
    return config.key() + '\x1f' + doc_id;
}
}  // namespace

void CandidateScoreTable::put(const TaskConfig& config, const std::string& doc_id,
                              ScoredPrediction pred) {
    scores_[table_key(config, doc_id)] = std::move(pred);
}

const ScoredPrediction& CandidateScoreTable::get(const TaskConfig& config,
                                                 const std::string& doc_id) const {
    auto it = scores_.find(table_key(config, doc_id));
    if (it == scores_.end())
        throw std::invalid_argument("score table miss: " + config.key() + " / " +
                                    doc_id);
    return it->second;
}

bool CandidateScoreTable::has(const TaskConfig& config,
                              const std::string& doc_id) const {
    return scores_.count(table_key(config, doc_id)) > 0;
}

void CandidateScoreTable::set_gold(const std::string& doc_id, ClassLabel label) {
    gold_[doc_id] = std::move(label);
}

const ClassLabel& CandidateScoreTable::gold(const std::string& doc_id) const {
    auto it = gold_.find(doc_id);
    if (it == gold_.end())
        throw std::invalid_argument("missing gold label for doc " + doc_id);
    return it->second;
}

std::optional<Task> find_thresholds(const TaskConfig& config,
                                    const CandidateScoreTable& table,
                                    const std::vector<std::string>& dev_doc_ids,
                                    const std::vector<ClassLabel>& output_classes,
                                    double alpha, double g) {
    Task task;
    task.config = config;
    long total_classified = 0;

    for (const ClassLabel& c : output_classes) {
        task.thresholds[c] = kInfThreshold;
        // (confidence, correct) for docs whose argmax is c.
        std::vector<std::pair<double, bool>> preds;
        for (const auto& doc_id : dev_doc_ids) {
            const ScoredPrediction& p = table.get(config, doc_id);
            if (p.predicted == c)
                preds.emplace_back(p.confidence, table.gold(doc_id) == c);
        }
        std::vector<double> uniq;
        for (const auto& [conf, _] : preds) uniq.push_back(conf);
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

        for (double t : uniq) {
            long n = 0, correct = 0;
            for (const auto& [conf, ok] : preds) {
                if (conf >= t) {
                    ++n;
                    if (ok) ++correct;
                }
            }
            if (n > 0 && static_cast<double>(correct) >= alpha * static_cast<double>(n)) {
                task.thresholds[c] = t;
                total_classified += n;
                break;
            }
        }
    }

    bool any_finite = std::any_of(
        task.thresholds.begin(), task.thresholds.end(),
        [](const auto& kv) { return std::isfinite(kv.second); });
    if (!any_finite) return std::nullopt;  // zero coverage regardless of g
    if (static_cast<double>(total_classified) <
        g * static_cast<double>(dev_doc_ids.size()))
        return std::nullopt;
    return task;
}

}  // namespace cascades
