#pragma once

#include <Eigen/Dense>

#include "casbah/rng.hpp"

namespace casbah::dist {

// Standard-normal density, CDF, log CDF and quantile (AS 241). The log CDF
// switches to the asymptotic tail expansion below -20 where erfc underflows.
double normal_pdf(double x, double mean, double sd);
double normal_log_pdf(double x, double mean, double sd);
double normal_cdf(double x);
double normal_log_cdf(double x);

// P(Z1 <= a, Z2 <= b) for standard bivariate normal with correlation rho.
// Absolute accuracy <= 1e-7 via adaptive quadrature of the arcsine-substituted
// one-dimensional integral representation.
double bvn_cdf(double a, double b, double rho);

// One draw from N(mean, sd^2) truncated to [lower, inf). Inverse CDF through
// the survival function in the well-conditioned regime, one-sided exponential
// rejection once the bound exceeds mean + 5 sd.
double sample_trunc_normal_lower(double mean, double sd, double lower,
                                 RngStream& rng);

// Categorical draw; weights must be nonnegative and not all zero.
int sample_categorical(const Eigen::VectorXd& weights, RngStream& rng);
// Same from unnormalized log masses, normalized from the max (never
// underflows).
int sample_categorical_log(const Eigen::VectorXd& log_weights, RngStream& rng);

struct MvnParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // symmetric PSD; eigenvalues >= -1e-10 clamped
};

Eigen::VectorXd sample_mvn(const MvnParams& params, RngStream& rng);

struct TruncMvnParams {
  Eigen::VectorXd lower_bounds;  // -inf allowed per coordinate
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Coordinate-wise Gibbs draw from the lower-truncated MVN, started from the
// feasible point max(mean, bound + eps). Every coordinate of the result
// satisfies its bound. Jitters 1e-8*I on Cholesky failure.
Eigen::VectorXd sample_trunc_mvn(const TruncMvnParams& params, RngStream& rng,
                                 int sweeps = 10);

struct SunParams {
  Eigen::VectorXd xi;           // location, length q
  Eigen::VectorXd omega_scale;  // per-coordinate scale, positive
  Eigen::MatrixXd delta;        // q x h skewness
  Eigen::VectorXd gamma;        // truncation, length h
  Eigen::MatrixXd gamma_cov;    // h x h SPD
};

// Additive representation: xi + omega .* (B0 + Delta Gamma^-1 B1) with
// B0 ~ N_q(0, I - Delta Gamma^-1 Delta^T) and B1 ~ TN_h(-gamma; 0, Gamma).
// Throws numerical_error if the B0 covariance is indefinite beyond -1e-6.
Eigen::VectorXd sample_sun(const SunParams& params, RngStream& rng,
                           int sweeps = 10);

// Cholesky-like factor F with F F^T ~= cov for PSD matrices: plain LLT when
// possible, else 1e-8 jitter, else eigenvalue clamping at zero. Eigenvalues
// below -neg_tol raise numerical_error.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, double neg_tol);

}  // namespace casbah::dist
