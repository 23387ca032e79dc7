#include "cascades/guarantees.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace cascades {

BettingEstimator::BettingEstimator(double target, double delta)
    : target_(target), delta_(delta) {
    if (!(target > 0.0 && target < 1.0))
        throw std::invalid_argument("target must be in (0,1)");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("delta must be in (0,1)");
}

void BettingEstimator::observe(int outcome) {
    if (outcome != 0 && outcome != 1)
        throw std::invalid_argument("outcome must be 0 or 1");
    const double x = static_cast<double>(outcome);
    const double i = static_cast<double>(++n_);

    // lambda_i uses the running variance estimate from step i-1.
    double lambda = std::sqrt(2.0 * std::log(2.0 / delta_) /
                              (i * std::log(i + 1.0) * sigma_sq_));
    double bet = std::min(lambda, 3.0 / (4.0 * target_));
    capital_ *= 1.0 + bet * (x - target_);

    sum_x_ += x;
    mu_ = (0.5 + sum_x_) / (i + 1.0);
    sum_sq_dev_ += (x - mu_) * (x - mu_);
    sigma_sq_ = (0.25 + sum_sq_dev_) / (i + 1.0);

    if (capital_ >= 1.0 / delta_) certified_ = true;  // anytime-valid stop
}

bool estimate(const OutcomeStream& stream, double target, double delta) {
    BettingEstimator est(target, delta);
    for (int x : stream) {
        est.observe(x);
        if (est.certified()) return true;
    }
    return false;
}

SplitPair split_dev(const std::vector<std::string>& dev_doc_ids,
                    std::uint64_t split_seed, std::size_t min_per_split) {
    SplitPair split;
    split.split_seed = split_seed;
    std::vector<std::string> shuffled = dev_doc_ids;
    std::mt19937_64 rng(split_seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t half = shuffled.size() / 2;
    if (half < min_per_split)
        throw std::invalid_argument(
            "dev set too small for guarantees: need at least " +
            std::to_string(2 * min_per_split) + " documents");
    split.validation_ids.assign(shuffled.begin(), shuffled.begin() + half);
    split.train_ids.assign(shuffled.begin() + half, shuffled.end());
    return split;
}

ShiftSchedule build_shift_schedule(const Cascade& cascade,
                                   const CandidateScoreTable& table,
                                   const std::vector<std::string>& train_ids,
                                   int s_max) {
    ShiftSchedule schedule;
    for (std::size_t t = 0; t < cascade.tasks.size(); ++t) {
        const Task& task = cascade.tasks[t];
        for (const auto& [label, base] : task.thresholds) {
            std::set<double> above;
            for (const auto& doc_id : train_ids) {
                const ScoredPrediction& p = table.get(task.config, doc_id);
                if (p.predicted == label && p.confidence > base)
                    above.insert(p.confidence);
            }
            std::vector<double> list(above.begin(), above.end());
            if (static_cast<int>(list.size()) > s_max) list.resize(s_max);
            schedule.candidates[{static_cast<int>(t), label}] = std::move(list);
        }
    }
    return schedule;
}

Cascade cascade_at_shift(const Cascade& cascade, const ShiftSchedule& schedule,
                         int s) {
    if (s == 0) return cascade;  // base thresholds
    Cascade shifted = cascade;
    for (std::size_t t = 0; t < shifted.tasks.size(); ++t) {
        for (auto& [label, tau] : shifted.tasks[t].thresholds) {
            const auto& list =
                schedule.candidates.at({static_cast<int>(t), label});
            if (s <= static_cast<int>(list.size()))
                tau = list[static_cast<std::size_t>(s) - 1];  // p_s, 1-based
            else
                tau = kInfThreshold;  // shift exceeds available values
        }
    }
    return shifted;
}

std::optional<CertifiedCascade> adjust_thresholds(
    const Cascade& cascade, const CandidateScoreTable& table,
    const std::vector<PreparedDocument>& validation_docs,
    const std::vector<std::string>& train_ids, const WorldIndex& world,
    const TokenCounter& counter, double alpha, double delta, int s_max) {
    ShiftSchedule schedule = build_shift_schedule(cascade, table, train_ids, s_max);
    TableScorer scorer(table);

    std::optional<CertifiedCascade> best;
    for (int s = s_max; s >= 0; --s) {
        Cascade shifted = cascade_at_shift(cascade, schedule, s);
        OutcomeStream stream;
        stream.reserve(validation_docs.size());
        for (const auto& doc : validation_docs) {
            DocResult r = run_cascade(shifted, doc, scorer, world, counter);
            stream.push_back(r.prediction == table.gold(doc.id) ? 1 : 0);
        }
        // Each estimate call spends the full delta budget; only the first
        // failing setting decides the outcome.
        if (estimate(stream, alpha, delta)) {
            CertifiedCascade c;
            c.cascade = std::move(shifted);
            c.shift = s;
            for (const auto& doc : validation_docs)
                c.validation_order.push_back(doc.id);
            best = std::move(c);
        } else {
            break;
        }
    }
    return best;
}

}  // namespace cascades
