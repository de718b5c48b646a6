#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "casbah/gibbs.hpp"
#include "casbah/model.hpp"

namespace casbah::strata {

enum class StratumLabel : int { negative = -1, dissociative = 0, positive = 1 };

// Column order used everywhere a (negative, dissociative, positive) triple
// appears: index 0 = negative, 1 = dissociative, 2 = positive.
inline int stratum_index(StratumLabel s) { return static_cast<int>(s) + 1; }
inline int stratum_index(int coded) { return coded + 1; }
inline StratumLabel stratum_from_index(int idx) {
  return static_cast<StratumLabel>(idx - 1);
}
const char* stratum_name(StratumLabel s);

// Dissociative when the two arms share a component; otherwise the sign of the
// treated-arm atom mean minus the control-arm atom mean. Equal means with
// distinct labels count as dissociative.
StratumLabel assign_stratum(int s0, int s1, const Eigen::VectorXd& eta);
StratumLabel assign_stratum(const MixtureState& state, int unit);

// Hubert-Arabie adjusted Rand index from the contingency table.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Per kept iteration, per-stratum mean of Y(1)-Y(0) (observed + imputed);
// NaN marks a stratum empty that iteration. Columns (neg, diss, pos).
Eigen::MatrixXd compute_pce(const gibbs::PosteriorDraws& draws,
                            const ObservedDataset& data);

// Same for P(1)-P(0).
Eigen::MatrixXd expected_post_treatment_gap(const gibbs::PosteriorDraws& draws,
                                            const ObservedDataset& data);

// Empirical stratum frequencies over kept draws; rows sum to 1.
Eigen::MatrixXd per_unit_probabilities(const gibbs::PosteriorDraws& draws);

// Posterior-mode stratum per unit, ties toward dissociative then negative.
std::vector<StratumLabel> point_partition(const Eigen::MatrixXd& per_unit_probs);

// Linear-interpolation quantile of the values (NaN entries ignored by callers).
double quantile(std::vector<double> values, double prob);

struct IntervalSummary {
  bool present = false;        // stratum nonempty in at least one draw
  double presence_rate = 0.0;  // fraction of draws where nonempty
  double median = 0.0;
  double lo90 = 0.0;
  double hi90 = 0.0;
};

// Median and equal-tailed 90% interval per stratum over non-missing draws.
std::array<IntervalSummary, 3> summarize_columns(const Eigen::MatrixXd& draws_by_stratum);

struct StrataSummary {
  Eigen::MatrixXd per_unit_probs;  // n x 3
  std::vector<StratumLabel> partition;
  Eigen::MatrixXd tau_draws;  // kept x 3
  Eigen::MatrixXd gap_draws;  // kept x 3
  std::array<IntervalSummary, 3> tau_summary;
  std::array<IntervalSummary, 3> gap_summary;
  std::array<int, 3> strata_counts{0, 0, 0};  // point-partition sizes
};

StrataSummary summarize(const gibbs::PosteriorDraws& draws,
                        const ObservedDataset& data);

}  // namespace casbah::strata
