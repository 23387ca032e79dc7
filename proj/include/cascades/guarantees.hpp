#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascades/assembly.hpp"
#include "cascades/core.hpp"
#include "cascades/executor.hpp"
#include "cascades/thresholds.hpp"

namespace cascades {

// X_j = 1 iff the cascade output matched the oracle label on validation
// doc j, in the fixed (seed-recorded) iteration order of D_V.
using OutcomeStream = std::vector<int>;

// Betting-style capital process certifying mean >= target with failure
// probability <= delta. Certifies as soon as any prefix's capital reaches
// 1/delta; an empty stream never certifies (empty product = 1).
//
//   K      = prod_j (1 + min(lambda_j, 3/(4 T)) (X_j - T))
//   lambda_i = sqrt(2 ln(2/delta) / (i ln(i+1) sigma^2_{i-1}))
//   sigma^2_i = (1/4 + sum_{j<=i} (X_j - mu_j)^2) / (i + 1)
//   mu_i     = (1/2 + sum_{j<=i} X_j) / (i + 1)
class BettingEstimator {
  public:
    BettingEstimator(double target, double delta);

    void observe(int outcome);  // outcome in {0, 1}
    bool certified() const { return certified_; }
    double capital() const { return capital_; }
    long count() const { return n_; }

  private:
    double target_;
    double delta_;
    double capital_ = 1.0;
    bool certified_ = false;
    long n_ = 0;
    double sum_x_ = 0.0;
    double sum_sq_dev_ = 0.0;
    double mu_ = 0.5;        // mu_0
    double sigma_sq_ = 0.25; // sigma^2_0
};

// True iff some prefix of the stream certifies mean >= target at failure
// probability delta.
bool estimate(const OutcomeStream& stream, double target, double delta);

// ---------------------------------------------------------------------------
// Split handling

struct SplitPair {
    std::vector<std::string> train_ids;       // D_T
    std::vector<std::string> validation_ids;  // D_V, in certified order
    std::uint64_t split_seed = 0;
};

// Disjoint equal-size random halves (odd leftover goes to D_T). Throws when
// either half would fall below min_per_split.
SplitPair split_dev(const std::vector<std::string>& dev_doc_ids,
                    std::uint64_t split_seed, std::size_t min_per_split = 75);

// ---------------------------------------------------------------------------
// Threshold adjustment (shift-index search)

struct ShiftSchedule {
    // (task index, class) -> ascending candidates p_1 < ... < p_k drawn from
    // training-split confidences strictly above the base threshold, capped
    // at the s_max smallest.
    std::map<std::pair<int, ClassLabel>, std::vector<double>> candidates;
};

ShiftSchedule build_shift_schedule(const Cascade& cascade,
                                   const CandidateScoreTable& table,
                                   const std::vector<std::string>& train_ids,
                                   int s_max);

// Thresholds at shift s: base tau at s = 0, p_s for 1 <= s <= k, +inf when
// s exceeds the candidate list (class disabled). Monotone in s.
Cascade cascade_at_shift(const Cascade& cascade, const ShiftSchedule& schedule,
                         int s);

struct CertifiedCascade {
    Cascade cascade;
    int shift = 0;  // chosen shift index
    std::vector<std::string> validation_order;
};

// Iterates s from s_max down to 0, running the shifted cascade on D_V and
// certifying with the betting estimator; keeps the last passing setting.
// nullopt (NotFound) when even the most conservative setting fails; the
// caller reverts to the oracle-only cascade.
std::optional<CertifiedCascade> adjust_thresholds(
    const Cascade& cascade, const CandidateScoreTable& table,
    const std::vector<PreparedDocument>& validation_docs,
    const std::vector<std::string>& train_ids, const WorldIndex& world,
    const TokenCounter& counter, double alpha, double delta, int s_max);

}  // namespace cascades
