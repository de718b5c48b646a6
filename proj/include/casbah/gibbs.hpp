#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "casbah/model.hpp"
#include "casbah/rng.hpp"

namespace casbah::gibbs {

struct GibbsConfig {
  int iterations = 3000;
  int burn_in = 1000;
  int thin = 1;
  // Sweeps of the stick-coefficient truncated-MVN draw. Too few leave the
  // unused sticks' weights under-shrunk, which lets spurious duplicate
  // components recruit counterfactual imputations and stick around.
  int tmvn_sweeps = 40;
  std::uint64_t seed = 1;
  bool progress = true;

  int kept() const { return (iterations - burn_in) / thin; }
  void validate() const;
};

// One stored snapshot per kept iteration.
struct DrawRecord {
  Eigen::VectorXd eta;
  Eigen::VectorXd sigma2;
  Eigen::VectorXi s0;
  Eigen::VectorXi s1;
  Eigen::VectorXd p_missing;
  Eigen::VectorXd y_missing;
  Eigen::VectorXi stratum;  // -1 negative, 0 dissociative, +1 positive
  Eigen::Vector2d theta0;
  Eigen::Vector4d theta1;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
};

struct PosteriorDraws {
  int n = 0;
  int p = 0;
  int L = 0;
  std::vector<DrawRecord> draws;
};

// Potential post-treatment values implied by the current state: observed arm
// from the data, counterfactual arm from p_missing.
Eigen::VectorXd potential_p(const MixtureState& state,
                            const ObservedDataset& data, int arm);

void step_cluster_allocation(MixtureState& state, const ObservedDataset& data,
                             const Hyperparams& hp, RngStream& rng);

// Conjugate pieces of the atom update, pooling both arms' members.
// An empty cluster (count = 0) collapses to the prior.
struct NormalPosterior {
  double mean;
  double variance;
};
NormalPosterior atom_location_posterior(int count, double sum, double sigma2_l,
                                        const Hyperparams& hp);
struct InvGammaPosterior {
  double shape;
  double scale;
};
InvGammaPosterior atom_scale_posterior(int count, double sse,
                                       const Hyperparams& hp);

void step_atoms(MixtureState& state, const ObservedDataset& data,
                const Hyperparams& hp, RngStream& rng);

// SUN draw of the probit stick coefficients for one arm, through the
// block-structured posterior (never forms the n-bar x n-bar matrix densely).
Eigen::MatrixXd sample_beta_arm(const Eigen::VectorXi& labels,
                                const Eigen::MatrixXd& x, const Hyperparams& hp,
                                int sweeps, RngStream& rng);

void step_weights(MixtureState& state, const ObservedDataset& data,
                  const Hyperparams& hp, int sweeps, RngStream& rng);

// Redraws the counterfactual-arm label from the prior weights, then imputes
// the missing post-treatment value (outcome-informed when T=1).
void step_impute_post_treatment(MixtureState& state,
                                const OutcomeState& outcome,
                                const ObservedDataset& data,
                                const Hyperparams& hp, RngStream& rng);

// Gaussian posterior of a heteroscedastic linear regression with prior
// N(prior_mean * 1, prior_var * I); precision_weights are inverse variances.
struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
GaussianPosterior normal_regression_posterior(
    const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
    const Eigen::VectorXd& precision_weights, double prior_mean,
    double prior_var);

void step_outcome_params(const MixtureState& state, OutcomeState& outcome,
                         const ObservedDataset& data, const Hyperparams& hp,
                         RngStream& rng);

// Observed-outcome log likelihood at the given log-variance coefficients;
// the independence-Metropolis ratio for lambda is a difference of these.
double lambda_log_likelihood(const MixtureState& state,
                             const OutcomeState& outcome,
                             const ObservedDataset& data, double lambda0,
                             double lambda1);

void step_lambda(const MixtureState& state, OutcomeState& outcome,
                 const ObservedDataset& data, const Hyperparams& hp,
                 RngStream& rng);

// Posterior-predictive draw of the missing potential outcome per unit.
Eigen::VectorXd step_impute_outcome(const MixtureState& state,
                                    const OutcomeState& outcome,
                                    const ObservedDataset& data,
                                    RngStream& rng);

PosteriorDraws run_chain(const ObservedDataset& data, const Hyperparams& hp,
                         const GibbsConfig& config);

}  // namespace casbah::gibbs
