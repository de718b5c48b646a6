#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "casbah/errors.hpp"
#include "casbah/rng.hpp"
#include "casbah/strata.hpp"

using namespace casbah;
using strata::StratumLabel;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

// Pair-counting ARI, the brute-force oracle form: over all unit pairs,
// a = together/together, b = together/apart, c = apart/together, d = apart².
double ari_pair_counting(const std::vector<int>& x, const std::vector<int>& y) {
  double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const bool tx = x[i] == x[j];
      const bool ty = y[i] == y[j];
      if (tx && ty) a += 1;
      else if (tx && !ty) b += 1;
      else if (!tx && ty) c += 1;
      else d += 1;
    }
  }
  const double num = 2.0 * (a * d - b * c);
  const double den = (a + b) * (b + d) + (a + c) * (c + d);
  if (den == 0.0) return b == 0 && c == 0 ? 1.0 : 0.0;
  return num / den;
}

// All partitions of {0..n-1} into at most max_blocks blocks, as label vectors
// in restricted-growth form.
void enumerate_partitions(int n, int max_blocks,
                          std::vector<std::vector<int>>& out) {
  std::vector<int> labels(n, 0);
  const auto rec = [&](auto&& self, int i, int used) -> void {
    if (i == n) {
      out.push_back(labels);
      return;
    }
    for (int l = 0; l <= used && l < max_blocks; ++l) {
      labels[i] = l;
      self(self, i + 1, std::max(used, l + 1));
    }
  };
  rec(rec, 0, 0);
}

gibbs::PosteriorDraws draws_from_labels(
    const std::vector<Eigen::VectorXi>& strata_per_iter,
    const std::vector<VectorXd>& p_missing,
    const std::vector<VectorXd>& y_missing) {
  gibbs::PosteriorDraws out;
  out.n = static_cast<int>(strata_per_iter[0].size());
  out.p = 0;
  out.L = 2;
  for (std::size_t r = 0; r < strata_per_iter.size(); ++r) {
    gibbs::DrawRecord d;
    d.stratum = strata_per_iter[r];
    d.p_missing = p_missing[r];
    d.y_missing = y_missing[r];
    d.eta = VectorXd::Zero(2);
    d.sigma2 = VectorXd::Ones(2);
    d.s0 = Eigen::VectorXi::Ones(out.n);
    d.s1 = Eigen::VectorXi::Ones(out.n);
    d.theta0.setZero();
    d.theta1.setZero();
    out.draws.push_back(std::move(d));
  }
  return out;
}

}  // namespace

TEST_CASE("stratum assignment from labels and atom means") {
  VectorXd eta(4);
  eta << 0.0, 2.0, 3.0, 1.0;
  CHECK(strata::assign_stratum(3, 3, eta) == StratumLabel::dissociative);
  // eta[s1] > eta[s0] with the published scenario-1 construction 2 -> 3.
  CHECK(strata::assign_stratum(2, 3, eta) == StratumLabel::positive);
  // Negative: treated atom lower (2 -> 1, atom means 2.0 -> 0.0).
  CHECK(strata::assign_stratum(2, 1, eta) == StratumLabel::negative);
  // Equal atom means with distinct labels count as dissociative.
  VectorXd tied(2);
  tied << 1.5, 1.5;
  CHECK(strata::assign_stratum(1, 2, tied) == StratumLabel::dissociative);
}

TEST_CASE("stratum assignment is invariant to atom-preserving relabeling") {
  RngStream rng(33);
  const int L = 6;
  for (int k = 0; k < 1000; ++k) {
    VectorXd eta(L);
    for (int l = 0; l < L; ++l) eta[l] = rng.normal(0.0, 2.0);
    const int s0 = 1 + static_cast<int>(rng.uniform() * L);
    const int s1 = 1 + static_cast<int>(rng.uniform() * L);
    // Random permutation of cluster indices.
    std::vector<int> perm(L);
    for (int l = 0; l < L; ++l) perm[l] = l;
    for (int l = L - 1; l > 0; --l) {
      std::swap(perm[l], perm[static_cast<int>(rng.uniform() * (l + 1))]);
    }
    VectorXd eta_p(L);
    for (int l = 0; l < L; ++l) eta_p[perm[l]] = eta[l];
    CHECK(strata::assign_stratum(s0, s1, eta) ==
          strata::assign_stratum(perm[s0 - 1] + 1, perm[s1 - 1] + 1, eta_p));
  }
}

TEST_CASE("adjusted rand index: closed cases") {
  CHECK(strata::adjusted_rand_index({1, 1, 2, 2}, {1, 1, 2, 2}) ==
        doctest::Approx(1.0));
  // Label names do not matter.
  CHECK(strata::adjusted_rand_index({1, 1, 2, 2}, {7, 7, 3, 3}) ==
        doctest::Approx(1.0));
  // 2-vs-2 crossing design.
  CHECK(strata::adjusted_rand_index({1, 1, 2, 2}, {1, 2, 1, 2}) ==
        doctest::Approx(-0.5));
  CHECK_THROWS_AS(strata::adjusted_rand_index({1, 2}, {1, 2, 3}), input_error);
}

TEST_CASE("adjusted rand index equals the pair-counting oracle on all"
          " partitions of 6 into <= 3 blocks") {
  std::vector<std::vector<int>> partitions;
  enumerate_partitions(6, 3, partitions);
  CHECK(partitions.size() == 122);  // 1 + 31 + 90
  for (const auto& x : partitions) {
    for (const auto& y : partitions) {
      const double fast = strata::adjusted_rand_index(x, y);
      const double slow = ari_pair_counting(x, y);
      CHECK(fast == doctest::Approx(slow).epsilon(1e-10));
      CHECK(fast == doctest::Approx(strata::adjusted_rand_index(y, x)).epsilon(1e-12));
    }
  }
  // ARI = 1 iff identical up to renaming.
  for (const auto& x : partitions) {
    for (const auto& y : partitions) {
      std::map<int, int> fwd, bwd;
      bool same = true;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (fwd.count(x[i]) && fwd[x[i]] != y[i]) same = false;
        if (bwd.count(y[i]) && bwd[y[i]] != x[i]) same = false;
        fwd[x[i]] = y[i];
        bwd[y[i]] = x[i];
      }
      if (same) {
        CHECK(strata::adjusted_rand_index(x, y) == doctest::Approx(1.0));
      } else {
        CHECK(strata::adjusted_rand_index(x, y) < 1.0 - 1e-9);
      }
    }
  }
}

TEST_CASE("point partition mode and tie rules") {
  MatrixXd probs(3, 3);
  // columns: (neg, diss, pos)
  probs << 0.1, 0.8, 0.1,   // dissociative
      0.5, 0.5, 0.0,        // tie -> dissociative
      0.45, 0.10, 0.45;     // tie -> negative
  const auto part = strata::point_partition(probs);
  CHECK(part[0] == StratumLabel::dissociative);
  CHECK(part[1] == StratumLabel::dissociative);
  CHECK(part[2] == StratumLabel::negative);
}

TEST_CASE("pce draws: direct group means and absence handling") {
  ObservedDataset data;
  data.x = MatrixXd::Zero(2, 0);
  data.t = VectorXi::Zero(2);
  data.t << 1, 0;
  data.p_obs = VectorXd::Zero(2);
  data.y_obs.resize(2);
  data.y_obs << 6.0, 1.0;  // unit0: Y(1)=6 observed; unit1: Y(0)=1 observed

  // Iteration 1: unit0 positive with Y(0)=1 -> diff 5; unit1 negative with
  // Y(1)=0 -> diff -1. Iteration 2: both dissociative, diffs 2 and 2.
  std::vector<VectorXi> strat(2);
  strat[0].resize(2);
  strat[0] << 1, -1;
  strat[1].resize(2);
  strat[1] << 0, 0;
  std::vector<VectorXd> pmiss(2, VectorXd::Zero(2));
  std::vector<VectorXd> ymiss(2);
  ymiss[0].resize(2);
  ymiss[0] << 1.0, 0.0;  // unit0's Y(0), unit1's Y(1)
  ymiss[1].resize(2);
  ymiss[1] << 4.0, 3.0;
  const auto draws = draws_from_labels(strat, pmiss, ymiss);

  const MatrixXd tau = strata::compute_pce(draws, data);
  REQUIRE(tau.rows() == 2);
  CHECK(tau(0, 2) == doctest::Approx(5.0));   // pos
  CHECK(tau(0, 0) == doctest::Approx(-1.0));  // neg
  CHECK(std::isnan(tau(0, 1)));               // diss absent that iteration
  CHECK(tau(1, 1) == doctest::Approx(2.0));   // both units dissociative
  CHECK(std::isnan(tau(1, 0)));
  CHECK(std::isnan(tau(1, 2)));

  const auto summary = strata::summarize_columns(tau);
  CHECK(summary[1].present);
  CHECK(summary[1].presence_rate == doctest::Approx(0.5));
  CHECK(summary[1].median == doctest::Approx(2.0));
  CHECK(summary[2].median == doctest::Approx(5.0));

  // All-dissociative constant difference: tau0 = c, others absent.
  std::vector<VectorXi> all_diss(3, [] {
    VectorXi v(2);
    v << 0, 0;
    return v;
  }());
  std::vector<VectorXd> ym(3);
  for (auto& v : ym) {
    v.resize(2);
    v << 3.0, -2.0;  // Y(0) for unit0 = 3 -> diff 3; Y(1) unit1 = -2 -> diff -3
  }
  const std::vector<VectorXd> pm3(3, VectorXd::Zero(2));
  const auto draws2 = draws_from_labels(all_diss, pm3, ym);
  const MatrixXd tau2 = strata::compute_pce(draws2, data);
  for (int r = 0; r < 3; ++r) {
    CHECK(tau2(r, 1) == doctest::Approx(0.0));  // (3 + -3)/2
    CHECK(std::isnan(tau2(r, 0)));
    CHECK(std::isnan(tau2(r, 2)));
  }
  const auto s2 = strata::summarize_columns(tau2);
  CHECK_FALSE(s2[0].present);
  CHECK_FALSE(s2[2].present);
  CHECK(std::isnan(s2[0].median));
}

TEST_CASE("post-treatment gap: single-unit stratum equals its difference") {
  ObservedDataset data;
  data.x = MatrixXd::Zero(2, 0);
  data.t = VectorXi::Zero(2);
  data.t << 1, 0;
  data.p_obs.resize(2);
  data.p_obs << 3.0, 1.0;  // unit0: P(1) obs; unit1: P(0) obs
  data.y_obs = VectorXd::Zero(2);
  std::vector<VectorXi> strat(1);
  strat[0].resize(2);
  strat[0] << 1, 0;
  std::vector<VectorXd> pmiss(1);
  pmiss[0].resize(2);
  pmiss[0] << 2.0, 1.0;  // unit0's P(0) = 2; unit1's P(1) = 1
  std::vector<VectorXd> ymiss(1, VectorXd::Zero(2));
  const auto draws = draws_from_labels(strat, pmiss, ymiss);
  const MatrixXd gap = strata::expected_post_treatment_gap(draws, data);
  CHECK(gap(0, 2) == doctest::Approx(1.0));  // 3 - 2
  CHECK(gap(0, 1) == doctest::Approx(0.0));  // 1 - 1
}

TEST_CASE("per-unit probabilities are frequencies with unit row sums") {
  std::vector<VectorXi> strat(4);
  for (int r = 0; r < 4; ++r) {
    strat[r].resize(2);
    strat[r] << (r < 3 ? 1 : -1), 0;
  }
  std::vector<VectorXd> pm(4, VectorXd::Zero(2)), ym(4, VectorXd::Zero(2));
  const auto draws = draws_from_labels(strat, pm, ym);
  const MatrixXd probs = strata::per_unit_probabilities(draws);
  CHECK(probs(0, 2) == doctest::Approx(0.75));
  CHECK(probs(0, 0) == doctest::Approx(0.25));
  CHECK(probs(1, 1) == doctest::Approx(1.0));
  for (int i = 0; i < 2; ++i) {
    CHECK(probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("quantiles use linear interpolation") {
  CHECK(strata::quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
  CHECK(strata::quantile({1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.75));
  CHECK(strata::quantile({5.0}, 0.9) == doctest::Approx(5.0));
  CHECK(strata::quantile({3.0, 1.0}, 0.0) == doctest::Approx(1.0));
}
