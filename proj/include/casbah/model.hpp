#pragma once

#include <Eigen/Dense>
#include <utility>

#include "casbah/rng.hpp"

namespace casbah {

// Priors and truncation level. Defaults are the noninformative setup used
// throughout: L=20, beta ~ N(0, 20 I), eta_l ~ N(0,20),
// sigma_l^2 ~ InvGamma(2, 0.5), theta ~ N(0, 10^2 I), lambda ~ N(0, 2^2).
struct Hyperparams {
  int L = 20;
  double mu_eta = 0.0;
  double sigma2_eta = 20.0;
  double gamma1 = 2.0;
  double gamma2 = 0.5;
  double xi = 0.0;       // common prior mean of the probit coefficients
  double omega2 = 20.0;  // common prior variance (independence prior)
  double mu_theta = 0.0;
  double sigma2_theta = 100.0;
  double mu_lambda = 0.0;
  double sigma2_lambda = 4.0;

  void validate() const;
};

struct ObservedDataset {
  Eigen::MatrixXd x;    // n x p covariates
  Eigen::VectorXi t;    // binary treatment
  Eigen::VectorXd p_obs;
  Eigen::VectorXd y_obs;

  int n() const { return static_cast<int>(t.size()); }
  int p() const { return static_cast<int>(x.cols()); }
  void validate(bool require_both_arms = true) const;
};

// Mixture side of the chain state. Atoms are shared across arms; labels are
// 1-based in {1..L}; p_missing holds the imputed counterfactual post-treatment
// value for each unit (the arm opposite the observed treatment).
struct MixtureState {
  Eigen::VectorXd eta;     // L
  Eigen::VectorXd sigma2;  // L, positive
  Eigen::MatrixXd beta0;   // (p+1) x (L-1)
  Eigen::MatrixXd beta1;
  Eigen::VectorXi s0;      // n
  Eigen::VectorXi s1;
  Eigen::VectorXd p_missing;  // n

  const Eigen::MatrixXd& beta(int arm) const { return arm == 0 ? beta0 : beta1; }
  Eigen::MatrixXd& beta(int arm) { return arm == 0 ? beta0 : beta1; }
  const Eigen::VectorXi& labels(int arm) const { return arm == 0 ? s0 : s1; }
  Eigen::VectorXi& labels(int arm) { return arm == 0 ? s0 : s1; }

  bool all_finite() const;
};

// Outcome regression side: theta0 = (theta00, theta01) for the control model,
// theta1 = (theta10..theta13) for the treated model, log-variance
// coefficients lambda0, lambda1.
struct OutcomeState {
  Eigen::Vector2d theta0;
  Eigen::Vector4d theta1;
  double lambda0 = 0.0;
  double lambda1 = 0.0;

  bool all_finite() const {
    return theta0.allFinite() && theta1.allFinite() &&
           std::isfinite(lambda0) && std::isfinite(lambda1);
  }
};

namespace model {

// Truncated probit stick-breaking weights for one unit:
// pi_l = Phi(alpha_l) prod_{r<l} (1 - Phi(alpha_r)), closure Phi(alpha_L) = 1,
// with alpha_l = beta_{l0} + x^T beta_l. Sums to 1 within 1e-12.
Eigen::VectorXd compute_weights(const Eigen::MatrixXd& beta_arm,
                                const Eigen::VectorXd& x_row);

// Log weights, stable for extreme linear predictors.
Eigen::VectorXd compute_log_weights(const Eigen::MatrixXd& beta_arm,
                                    const Eigen::VectorXd& x_row);

// Prior probability that a unit's two arms share a mixture component:
// rho2 [ (1 + rho2 - 2 rho1)^L - 1 ] / (rho2 - 2 rho1), with the analytic
// limit L * rho2 when the denominator vanishes. Always in [0,1].
double prior_dissociative_probability(double rho1, double rho2, int L);

// (rho1, rho2) = (E Phi(alpha), E Phi(alpha)^2) for alpha ~ N(alpha_mean, 1):
// rho1 = Phi(alpha_mean / sqrt 2), rho2 = Phi2(.,.,1/2) orthant identity.
std::pair<double, double> rho_moments(double alpha_mean);

// Initialization of the chain: atoms and coefficients from their priors,
// all labels in cluster 1, p_missing set to the observed arm's value.
// Outcome parameters start at their prior means.
std::pair<MixtureState, OutcomeState> init_state(const ObservedDataset& data,
                                                 const Hyperparams& hp,
                                                 RngStream& rng);

}  // namespace model
}  // namespace casbah
