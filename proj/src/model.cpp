#include "casbah/model.hpp"

#include <cmath>
#include <sstream>

#include "casbah/dist.hpp"
#include "casbah/errors.hpp"

namespace casbah {

void Hyperparams::validate() const {
  if (L < 2) throw input_error("Hyperparams: L must be >= 2");
  if (!(sigma2_eta > 0.0 && sigma2_theta > 0.0 && sigma2_lambda > 0.0 &&
        omega2 > 0.0)) {
    throw input_error("Hyperparams: variances must be positive");
  }
  if (!(gamma1 > 0.0 && gamma2 > 0.0)) {
    throw input_error("Hyperparams: gamma1 and gamma2 must be positive");
  }
}

void ObservedDataset::validate(bool require_both_arms) const {
  const int nn = n();
  if (nn < 1) throw input_error("dataset: needs at least one unit");
  if (x.rows() != nn || p_obs.size() != nn || y_obs.size() != nn) {
    throw input_error("dataset: column lengths disagree");
  }
  if (!x.allFinite() || !p_obs.allFinite() || !y_obs.allFinite()) {
    throw input_error("dataset: non-finite entries");
  }
  int n1 = 0;
  for (int i = 0; i < nn; ++i) {
    if (t[i] != 0 && t[i] != 1) {
      std::ostringstream oss;
      oss << "dataset: treatment must be 0 or 1 (unit " << i + 1 << ")";
      throw input_error(oss.str());
    }
    n1 += t[i];
  }
  if (require_both_arms && (n1 == 0 || n1 == nn)) {
    throw input_error("dataset: both treatment arms must be nonempty");
  }
}

bool MixtureState::all_finite() const {
  return eta.allFinite() && sigma2.allFinite() && beta0.allFinite() &&
         beta1.allFinite() && p_missing.allFinite() &&
         (sigma2.array() > 0.0).all();
}

namespace model {

Eigen::VectorXd compute_weights(const Eigen::MatrixXd& beta_arm,
                                const Eigen::VectorXd& x_row) {
  const int L = static_cast<int>(beta_arm.cols()) + 1;
  if (beta_arm.rows() != x_row.size() + 1) {
    throw input_error("compute_weights: covariate length mismatch");
  }
  if (!beta_arm.allFinite() || !x_row.allFinite()) {
    throw input_error("compute_weights: non-finite inputs");
  }
  Eigen::VectorXd c(x_row.size() + 1);
  c[0] = 1.0;
  c.tail(x_row.size()) = x_row;
  Eigen::VectorXd pi(L);
  double remaining = 1.0;
  for (int l = 0; l < L - 1; ++l) {
    const double w = dist::normal_cdf(beta_arm.col(l).dot(c));
    pi[l] = w * remaining;
    remaining *= 1.0 - w;
  }
  pi[L - 1] = remaining;
  return pi;
}

Eigen::VectorXd compute_log_weights(const Eigen::MatrixXd& beta_arm,
                                    const Eigen::VectorXd& x_row) {
  const int L = static_cast<int>(beta_arm.cols()) + 1;
  Eigen::VectorXd c(x_row.size() + 1);
  c[0] = 1.0;
  c.tail(x_row.size()) = x_row;
  Eigen::VectorXd logpi(L);
  double log_remaining = 0.0;
  for (int l = 0; l < L - 1; ++l) {
    const double alpha = beta_arm.col(l).dot(c);
    logpi[l] = dist::normal_log_cdf(alpha) + log_remaining;
    log_remaining += dist::normal_log_cdf(-alpha);
  }
  logpi[L - 1] = log_remaining;
  return logpi;
}

double prior_dissociative_probability(double rho1, double rho2, int L) {
  if (!(rho1 > 0.0 && rho1 <= 1.0)) {
    throw input_error("prior_dissociative_probability: rho1 must be in (0,1]");
  }
  constexpr double slack = 1e-9;
  if (rho2 < rho1 * rho1 - slack || rho2 > rho1 + slack) {
    throw input_error(
        "prior_dissociative_probability: rho2 must satisfy rho1^2 <= rho2 <= rho1");
  }
  if (L < 1) throw input_error("prior_dissociative_probability: L must be >= 1");

  const double denom = rho2 - 2.0 * rho1;
  double value;
  if (std::abs(denom) < 1e-12) {
    value = static_cast<double>(L) * rho2;
  } else {
    const double base = 1.0 + rho2 - 2.0 * rho1;
    value = rho2 * (std::pow(base, L) - 1.0) / denom;
  }
  return std::min(1.0, std::max(0.0, value));
}

std::pair<double, double> rho_moments(double alpha_mean) {
  if (!std::isfinite(alpha_mean)) {
    throw input_error("rho_moments: alpha_mean must be finite");
  }
  const double a = alpha_mean / std::sqrt(2.0);
  const double rho1 = dist::normal_cdf(a);
  const double rho2 = dist::bvn_cdf(a, a, 0.5);
  return {rho1, rho2};
}

std::pair<MixtureState, OutcomeState> init_state(const ObservedDataset& data,
                                                 const Hyperparams& hp,
                                                 RngStream& rng) {
  hp.validate();
  data.validate(false);
  const int n = data.n();
  const int p = data.p();
  const int L = hp.L;

  MixtureState ms;
  ms.eta.resize(L);
  ms.sigma2.resize(L);
  for (int l = 0; l < L; ++l) {
    ms.eta[l] = rng.normal(hp.mu_eta, std::sqrt(hp.sigma2_eta));
    ms.sigma2[l] = rng.inv_gamma(hp.gamma1, hp.gamma2);
  }
  // Cluster 1 starts at the pooled moments of the observed post-treatment
  // values. The first allocation pass runs before the atoms update, so with
  // prior-drawn atoms it scatters each data mode across several labels; once
  // the two arms' weights lock onto different duplicates of an atom the
  // one-at-a-time updates cannot merge them and the shared-component signal
  // is lost. Anchoring one cluster on the data keeps every mode together
  // until its own component peels off, identically in both arms.
  const double pooled_mean = data.p_obs.mean();
  const double pooled_var =
      n > 1 ? (data.p_obs.array() - pooled_mean).square().sum() / (n - 1) : 1.0;
  ms.eta[0] = pooled_mean;
  ms.sigma2[0] = std::max(pooled_var, 1e-2);
  const double omega = std::sqrt(hp.omega2);
  ms.beta0.resize(p + 1, L - 1);
  ms.beta1.resize(p + 1, L - 1);
  for (int arm = 0; arm < 2; ++arm) {
    auto& b = ms.beta(arm);
    for (int l = 0; l < L - 1; ++l) {
      for (int j = 0; j <= p; ++j) b(j, l) = rng.normal(hp.xi, omega);
    }
  }
  // Labels all start in one cluster. A scattered start fragments each data
  // mode across labels, and once both arms' weights lock onto different
  // duplicates of the same atom the one-at-a-time updates never merge them,
  // which destroys the shared-component (dissociative) signal.
  ms.s0 = Eigen::VectorXi::Ones(n);
  ms.s1 = Eigen::VectorXi::Ones(n);
  ms.p_missing = data.p_obs;

  // Outcome parameters start at the prior means rather than at prior draws:
  // a large random slope theta12 + theta13 P(1) at iteration one lets the
  // treated-arm imputation reproduce Y exactly and locks the chain in a
  // zero-residual-variance mode. The neutral start routes the first
  // imputation through the uninformative-slope guard instead.
  OutcomeState os;
  os.theta0.setConstant(hp.mu_theta);
  os.theta1.setConstant(hp.mu_theta);
  os.lambda0 = hp.mu_lambda;
  os.lambda1 = hp.mu_lambda;
  return {std::move(ms), os};
}

}  // namespace model
}  // namespace casbah
