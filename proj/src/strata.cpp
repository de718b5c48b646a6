#include "casbah/strata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "casbah/errors.hpp"

namespace casbah::strata {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Column means of the per-unit y1-y0 (or p1-p0) differences within each
// stratum for one draw.
Eigen::Vector3d stratum_means(const Eigen::VectorXi& stratum,
                              const Eigen::VectorXd& diff) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3i count = Eigen::Vector3i::Zero();
  for (int i = 0; i < stratum.size(); ++i) {
    const int idx = stratum_index(stratum[i]);
    sum[idx] += diff[i];
    count[idx] += 1;
  }
  Eigen::Vector3d out;
  for (int s = 0; s < 3; ++s) {
    out[s] = count[s] > 0 ? sum[s] / count[s] : kNaN;
  }
  return out;
}

Eigen::MatrixXd per_stratum_draws(const gibbs::PosteriorDraws& draws,
                                  const ObservedDataset& data, bool outcome) {
  const int kept = static_cast<int>(draws.draws.size());
  const int n = data.n();
  Eigen::MatrixXd out(kept, 3);
  Eigen::VectorXd diff(n);
  for (int r = 0; r < kept; ++r) {
    const auto& d = draws.draws[r];
    for (int i = 0; i < n; ++i) {
      if (outcome) {
        const double y1 = data.t[i] == 1 ? data.y_obs[i] : d.y_missing[i];
        const double y0 = data.t[i] == 0 ? data.y_obs[i] : d.y_missing[i];
        diff[i] = y1 - y0;
      } else {
        const double p1 = data.t[i] == 1 ? data.p_obs[i] : d.p_missing[i];
        const double p0 = data.t[i] == 0 ? data.p_obs[i] : d.p_missing[i];
        diff[i] = p1 - p0;
      }
    }
    out.row(r) = stratum_means(d.stratum, diff).transpose();
  }
  return out;
}
}  // namespace

const char* stratum_name(StratumLabel s) {
  switch (s) {
    case StratumLabel::negative: return "neg";
    case StratumLabel::dissociative: return "diss";
    case StratumLabel::positive: return "pos";
  }
  return "?";
}

StratumLabel assign_stratum(int s0, int s1, const Eigen::VectorXd& eta) {
  if (s0 == s1) return StratumLabel::dissociative;
  const double e0 = eta[s0 - 1];
  const double e1 = eta[s1 - 1];
  if (e1 > e0) return StratumLabel::positive;
  if (e1 < e0) return StratumLabel::negative;
  return StratumLabel::dissociative;
}

StratumLabel assign_stratum(const MixtureState& state, int unit) {
  return assign_stratum(state.s0[unit], state.s1[unit], state.eta);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) {
    throw input_error("adjusted_rand_index: partitions must have equal length");
  }
  const auto n = a.size();
  if (n < 2) throw input_error("adjusted_rand_index: need at least 2 elements");
  std::map<int, int> ra, rb;
  for (int v : a) ra.emplace(v, static_cast<int>(ra.size()));
  for (int v : b) rb.emplace(v, static_cast<int>(rb.size()));
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ra.size(), rb.size());
  for (std::size_t i = 0; i < n; ++i) {
    table(ra[a[i]], rb[b[i]]) += 1.0;
  }
  const auto comb2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double sum_ij = 0.0;
  for (int i = 0; i < table.rows(); ++i) {
    for (int j = 0; j < table.cols(); ++j) sum_ij += comb2(table(i, j));
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < table.rows(); ++i) sum_a += comb2(table.row(i).sum());
  for (int j = 0; j < table.cols(); ++j) sum_b += comb2(table.col(j).sum());
  const double expected = sum_a * sum_b / comb2(static_cast<double>(n));
  const double maximum = 0.5 * (sum_a + sum_b);
  if (std::abs(maximum - expected) < 1e-12) {
    // Degenerate (e.g. both partitions trivial): identical contingency means
    // perfect agreement.
    return sum_ij == maximum ? 1.0 : 0.0;
  }
  return (sum_ij - expected) / (maximum - expected);
}

Eigen::MatrixXd compute_pce(const gibbs::PosteriorDraws& draws,
                            const ObservedDataset& data) {
  return per_stratum_draws(draws, data, true);
}

Eigen::MatrixXd expected_post_treatment_gap(const gibbs::PosteriorDraws& draws,
                                            const ObservedDataset& data) {
  return per_stratum_draws(draws, data, false);
}

Eigen::MatrixXd per_unit_probabilities(const gibbs::PosteriorDraws& draws) {
  const int kept = static_cast<int>(draws.draws.size());
  if (kept == 0) throw input_error("per_unit_probabilities: no draws");
  const int n = draws.n;
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n, 3);
  for (const auto& d : draws.draws) {
    for (int i = 0; i < n; ++i) probs(i, stratum_index(d.stratum[i])) += 1.0;
  }
  return probs / static_cast<double>(kept);
}

std::vector<StratumLabel> point_partition(const Eigen::MatrixXd& per_unit_probs) {
  if (per_unit_probs.cols() != 3) {
    throw input_error("point_partition: expected 3 columns");
  }
  std::vector<StratumLabel> out(per_unit_probs.rows());
  for (int i = 0; i < per_unit_probs.rows(); ++i) {
    const double p_neg = per_unit_probs(i, 0);
    const double p_diss = per_unit_probs(i, 1);
    const double p_pos = per_unit_probs(i, 2);
    if (p_diss >= p_neg && p_diss >= p_pos) {
      out[i] = StratumLabel::dissociative;
    } else if (p_neg >= p_pos) {
      out[i] = StratumLabel::negative;
    } else {
      out[i] = StratumLabel::positive;
    }
  }
  return out;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double h = prob * (static_cast<double>(values.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::array<IntervalSummary, 3> summarize_columns(
    const Eigen::MatrixXd& draws_by_stratum) {
  std::array<IntervalSummary, 3> out;
  for (int s = 0; s < 3; ++s) {
    std::vector<double> vals;
    vals.reserve(draws_by_stratum.rows());
    for (int r = 0; r < draws_by_stratum.rows(); ++r) {
      if (!std::isnan(draws_by_stratum(r, s))) vals.push_back(draws_by_stratum(r, s));
    }
    IntervalSummary& sum = out[s];
    sum.present = !vals.empty();
    sum.presence_rate = draws_by_stratum.rows() == 0
                            ? 0.0
                            : static_cast<double>(vals.size()) /
                                  static_cast<double>(draws_by_stratum.rows());
    if (sum.present) {
      sum.median = quantile(vals, 0.5);
      sum.lo90 = quantile(vals, 0.05);
      sum.hi90 = quantile(vals, 0.95);
    } else {
      sum.median = sum.lo90 = sum.hi90 = kNaN;
    }
  }
  return out;
}

StrataSummary summarize(const gibbs::PosteriorDraws& draws,
                        const ObservedDataset& data) {
  StrataSummary s;
  s.per_unit_probs = per_unit_probabilities(draws);
  s.partition = point_partition(s.per_unit_probs);
  s.tau_draws = compute_pce(draws, data);
  s.gap_draws = expected_post_treatment_gap(draws, data);
  s.tau_summary = summarize_columns(s.tau_draws);
  s.gap_summary = summarize_columns(s.gap_draws);
  for (const auto label : s.partition) s.strata_counts[stratum_index(label)] += 1;
  return s;
}

}  // namespace casbah::strata
