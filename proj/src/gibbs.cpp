#include "casbah/gibbs.hpp"

#include <cassert>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "casbah/dist.hpp"
#include "casbah/errors.hpp"
#include "casbah/strata.hpp"

namespace casbah::gibbs {

void GibbsConfig::validate() const {
  if (!(iterations > burn_in && burn_in >= 0)) {
    throw input_error("gibbs config: need iterations > burn_in >= 0");
  }
  if (thin < 1) throw input_error("gibbs config: thin must be >= 1");
  if (tmvn_sweeps < 1) throw input_error("gibbs config: tmvn_sweeps must be >= 1");
}

Eigen::VectorXd potential_p(const MixtureState& state,
                            const ObservedDataset& data, int arm) {
  const int n = data.n();
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    out[i] = (data.t[i] == arm) ? data.p_obs[i] : state.p_missing[i];
  }
  return out;
}

namespace {

// Covariates are often low-cardinality (binary in the simulation studies), so
// the per-unit stick weights repeat; compute each distinct row once.
class LogWeightCache {
 public:
  LogWeightCache(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& x)
      : beta_(beta), x_(x) {}

  const Eigen::VectorXd& row(int i) {
    std::vector<double> key(x_.cols());
    for (int j = 0; j < x_.cols(); ++j) key[j] = x_(i, j);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_
               .emplace(std::move(key),
                        model::compute_log_weights(beta_, x_.row(i).transpose()))
               .first;
    }
    return it->second;
  }

 private:
  const Eigen::MatrixXd& beta_;
  const Eigen::MatrixXd& x_;
  std::map<std::vector<double>, Eigen::VectorXd> cache_;
};

}  // namespace

void step_cluster_allocation(MixtureState& state, const ObservedDataset& data,
                             const Hyperparams& hp, RngStream& rng) {
  const int n = data.n();
  const int L = hp.L;
  Eigen::VectorXd log_sd = state.sigma2.array().sqrt().log();
  Eigen::VectorXd logmass(L);
  for (int arm = 0; arm < 2; ++arm) {
    LogWeightCache weights(state.beta(arm), data.x);
    Eigen::VectorXi& labels = state.labels(arm);
    for (int i = 0; i < n; ++i) {
      const double p_val =
          (data.t[i] == arm) ? data.p_obs[i] : state.p_missing[i];
      logmass = weights.row(i);
      for (int l = 0; l < L; ++l) {
        const double z = (p_val - state.eta[l]);
        logmass[l] += -0.5 * z * z / state.sigma2[l] - log_sd[l];
      }
      labels[i] = 1 + dist::sample_categorical_log(logmass, rng);
    }
  }
}

NormalPosterior atom_location_posterior(int count, double sum, double sigma2_l,
                                        const Hyperparams& hp) {
  // Empty cluster: the formulas collapse to the prior.
  const double precision = count / sigma2_l + 1.0 / hp.sigma2_eta;
  const double mean =
      (sum / sigma2_l + hp.mu_eta / hp.sigma2_eta) / precision;
  return {mean, 1.0 / precision};
}

InvGammaPosterior atom_scale_posterior(int count, double sse,
                                       const Hyperparams& hp) {
  return {hp.gamma1 + 0.5 * count, hp.gamma2 + 0.5 * std::max(sse, 0.0)};
}

void step_atoms(MixtureState& state, const ObservedDataset& data,
                const Hyperparams& hp, RngStream& rng) {
  const int n = data.n();
  const int L = hp.L;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(L);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(L);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(L);
  for (int arm = 0; arm < 2; ++arm) {
    const Eigen::VectorXi& labels = state.labels(arm);
    for (int i = 0; i < n; ++i) {
      const double p_val =
          (data.t[i] == arm) ? data.p_obs[i] : state.p_missing[i];
      const int l = labels[i] - 1;
      sum[l] += p_val;
      sumsq[l] += p_val * p_val;
      count[l] += 1;
    }
  }
  for (int l = 0; l < L; ++l) {
    const NormalPosterior loc =
        atom_location_posterior(count[l], sum[l], state.sigma2[l], hp);
    state.eta[l] = rng.normal(loc.mean, std::sqrt(loc.variance));
    const double sse = sumsq[l] - 2.0 * state.eta[l] * sum[l] +
                       count[l] * state.eta[l] * state.eta[l];
    const InvGammaPosterior scale = atom_scale_posterior(count[l], sse, hp);
    state.sigma2[l] = rng.inv_gamma(scale.shape, scale.scale);
  }
}

Eigen::MatrixXd sample_beta_arm(const Eigen::VectorXi& labels,
                                const Eigen::MatrixXd& x, const Hyperparams& hp,
                                int sweeps, RngStream& rng) {
  const int n = static_cast<int>(labels.size());
  const int p = static_cast<int>(x.cols());
  const int m = p + 1;
  const int K = hp.L - 1;
  const double omega2 = hp.omega2;
  const double omega = std::sqrt(omega2);

  // Stacked stick rows: unit i contributes sticks 1..min(S_i, L-1), sign +1
  // only on its own stick. Everything below works per stick block; the
  // posterior couples rows only within a block.
  struct StickRow {
    int unit;
    int block;
    double sign;
    double d;
    double lower;
    double lambda_jj;
  };
  std::vector<StickRow> rows;
  rows.reserve(static_cast<std::size_t>(n) * 2);
  for (int i = 0; i < n; ++i) {
    const int s = labels[i];
    if (s < 1 || s > hp.L) throw input_error("sample_beta_arm: label out of range");
    const int n_i = std::min(s, K);
    for (int k = 0; k < n_i; ++k) {
      rows.push_back({i, k, (k + 1 == s) ? 1.0 : -1.0, 0.0, 0.0, 0.0});
    }
  }

  Eigen::MatrixXd beta(m, K);
  if (rows.empty()) {
    for (int l = 0; l < K; ++l) {
      for (int j = 0; j < m; ++j) beta(j, l) = rng.normal(hp.xi, omega);
    }
    return beta;
  }

  Eigen::MatrixXd C(n, m);  // c_i = (1, x_i)
  C.col(0).setOnes();
  C.rightCols(p) = x;

  std::vector<Eigen::MatrixXd> G(K, Eigen::MatrixXd::Zero(m, m));
  for (const auto& r : rows) {
    G[r.block].noalias() += C.row(r.unit).transpose() * C.row(r.unit);
  }
  std::vector<Eigen::MatrixXd> V(K);
  std::vector<Eigen::MatrixXd> V_chol(K);
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd A = G[k] + Eigen::MatrixXd::Identity(m, m) / omega2;
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool ok = false;
    for (const double jitter : {0.0, 1e-8, 1e-5}) {  // three attempts
      llt.compute(A + jitter * Eigen::MatrixXd::Identity(m, m));
      if (llt.info() == Eigen::Success) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw numerical_error("sample_beta_arm: stick block not SPD after jitter");
    }
    V[k] = llt.solve(Eigen::MatrixXd::Identity(m, m));
    V_chol[k] = dist::psd_factor(V[k], 1e-10);
  }

  for (auto& r : rows) {
    const auto c = C.row(r.unit);
    r.d = std::sqrt(omega2 * c.squaredNorm() + 1.0);
    // gamma_pst entry: sign * xi * sum(c) / d; bound for B1 is its negative.
    r.lower = -(r.sign * hp.xi * c.sum() / r.d);
    const double rho = c * V[r.block] * c.transpose();
    r.lambda_jj = r.d * r.d * (1.0 - rho);
    if (!(r.lambda_jj > 0.0)) {
      throw numerical_error("sample_beta_arm: nonpositive conditional precision");
    }
  }

  // Coordinate Gibbs on B1 ~ TN(-gamma_pst; 0, Gamma_pst) from the feasible
  // start max(0, bound + eps), tracking u = Xbar^T (d .* B1) blockwise.
  constexpr double kStartEps = 1e-8;
  const std::size_t nbar = rows.size();
  Eigen::VectorXd b1(nbar);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(m, K);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, K);
  for (std::size_t j = 0; j < nbar; ++j) {
    const auto& r = rows[j];
    b1[j] = std::max(0.0, r.lower + kStartEps);
    u.col(r.block) += r.sign * r.d * b1[j] * C.row(r.unit).transpose();
  }
  for (int k = 0; k < K; ++k) w.col(k) = V[k] * u.col(k);

  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t j = 0; j < nbar; ++j) {
      const auto& r = rows[j];
      const auto c = C.row(r.unit);
      const double lx = r.d * (r.d * b1[j] - r.sign * c.dot(w.col(r.block)));
      const double cond_mean = -(lx - r.lambda_jj * b1[j]) / r.lambda_jj;
      const double cond_sd = 1.0 / std::sqrt(r.lambda_jj);
      const double nx =
          dist::sample_trunc_normal_lower(cond_mean, cond_sd, r.lower, rng);
      const double delta = nx - b1[j];
      if (delta != 0.0) {
        u.col(r.block) += r.sign * r.d * delta * c.transpose();
        w.col(r.block) = V[r.block] * u.col(r.block);
        b1[j] = nx;
      }
    }
  }

  // beta_k = xi + omega B0_k + omega (Delta Gamma^-1 B1)_k with
  // Cov(B0_k) = V_k / omega^2 and (Delta Gamma^-1 B1)_k = omega (u_k - G_k w_k).
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd z(m);
    for (int j = 0; j < m; ++j) z[j] = rng.normal();
    beta.col(k) = Eigen::VectorXd::Constant(m, hp.xi) + V_chol[k] * z +
                  omega2 * (u.col(k) - G[k] * w.col(k));
  }
  return beta;
}

void step_weights(MixtureState& state, const ObservedDataset& data,
                  const Hyperparams& hp, int sweeps, RngStream& rng) {
  state.beta0 = sample_beta_arm(state.s0, data.x, hp, sweeps, rng);
  state.beta1 = sample_beta_arm(state.s1, data.x, hp, sweeps, rng);
}

void step_impute_post_treatment(MixtureState& state,
                                const OutcomeState& outcome,
                                const ObservedDataset& data,
                                const Hyperparams& hp, RngStream& rng) {
  const int n = data.n();
  LogWeightCache weights0(state.beta0, data.x);
  LogWeightCache weights1(state.beta1, data.x);
  for (int i = 0; i < n; ++i) {
    const int cf_arm = 1 - data.t[i];
    const Eigen::VectorXd& logw =
        (cf_arm == 0 ? weights0 : weights1).row(i);
    const int l = 1 + dist::sample_categorical_log(logw, rng);
    state.labels(cf_arm)[i] = l;
    const double eta_l = state.eta[l - 1];
    const double sig2_l = state.sigma2[l - 1];

    if (data.t[i] == 0) {
      state.p_missing[i] = rng.normal(eta_l, std::sqrt(sig2_l));
      continue;
    }
    const double p1 = data.p_obs[i];
    const double slope = outcome.theta1[2] + outcome.theta1[3] * p1;
    if (std::abs(slope) < 1e-10) {
      // Exact limit of the update: the outcome carries no information on P(0).
      state.p_missing[i] = rng.normal(eta_l, std::sqrt(sig2_l));
      continue;
    }
    const double m1 =
        (data.y_obs[i] - outcome.theta1[0] - outcome.theta1[1] * p1) / slope;
    const double v1 =
        std::exp(outcome.lambda0 + outcome.lambda1 * p1) / (slope * slope);
    const double v = 1.0 / sig2_l + 1.0 / v1;
    const double mean = (eta_l / sig2_l + m1 / v1) / v;
    state.p_missing[i] = rng.normal(mean, std::sqrt(1.0 / v));
  }
}

GaussianPosterior normal_regression_posterior(
    const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
    const Eigen::VectorXd& precision_weights, double prior_mean,
    double prior_var) {
  const auto q = design.cols();
  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(q, q) / prior_var;
  Eigen::VectorXd shift = Eigen::VectorXd::Constant(q, prior_mean / prior_var);
  if (design.rows() > 0) {
    prec.noalias() +=
        design.transpose() * precision_weights.asDiagonal() * design;
    shift.noalias() +=
        design.transpose() * precision_weights.cwiseProduct(y).matrix();
  }
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    prec += 1e-8 * Eigen::MatrixXd::Identity(q, q);
    llt.compute(prec);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("outcome update: singular precision matrix");
    }
  }
  GaussianPosterior post;
  post.covariance = llt.solve(Eigen::MatrixXd::Identity(q, q));
  post.mean = llt.solve(shift);
  return post;
}

void step_outcome_params(const MixtureState& state, OutcomeState& outcome,
                         const ObservedDataset& data, const Hyperparams& hp,
                         RngStream& rng) {
  const int n = data.n();
  const Eigen::VectorXd p0 = potential_p(state, data, 0);
  const Eigen::VectorXd p1 = potential_p(state, data, 1);

  int n0 = 0;
  for (int i = 0; i < n; ++i) n0 += (data.t[i] == 0);
  const int n1 = n - n0;

  // Control model: y = theta00 + theta01 P(0), variance exp(lambda0).
  Eigen::MatrixXd x0(n0, 2);
  Eigen::VectorXd y0(n0), w0(n0);
  // Treated model: design (1, P(1), P(0), P(1) P(0)), variance
  // exp(lambda0 + lambda1 P(1)); weights are the inverse variances.
  Eigen::MatrixXd x1(n1, 4);
  Eigen::VectorXd y1(n1), w1(n1);
  int i0 = 0, i1 = 0;
  for (int i = 0; i < n; ++i) {
    if (data.t[i] == 0) {
      x0(i0, 0) = 1.0;
      x0(i0, 1) = p0[i];
      y0[i0] = data.y_obs[i];
      w0[i0] = std::exp(-outcome.lambda0);
      ++i0;
    } else {
      x1(i1, 0) = 1.0;
      x1(i1, 1) = p1[i];
      x1(i1, 2) = p0[i];
      x1(i1, 3) = p1[i] * p0[i];
      y1[i1] = data.y_obs[i];
      w1[i1] = std::exp(-(outcome.lambda0 + outcome.lambda1 * p1[i]));
      ++i1;
    }
  }
  GaussianPosterior post0 =
      normal_regression_posterior(x0, y0, w0, hp.mu_theta, hp.sigma2_theta);
  outcome.theta0 = dist::sample_mvn({post0.mean, post0.covariance}, rng);
  GaussianPosterior post1 =
      normal_regression_posterior(x1, y1, w1, hp.mu_theta, hp.sigma2_theta);
  outcome.theta1 = dist::sample_mvn({post1.mean, post1.covariance}, rng);
}

double lambda_log_likelihood(const MixtureState& state,
                             const OutcomeState& outcome,
                             const ObservedDataset& data, double lambda0,
                             double lambda1) {
  const int n = data.n();
  const Eigen::VectorXd p0 = potential_p(state, data, 0);
  const Eigen::VectorXd p1 = potential_p(state, data, 1);
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    double mu, logvar;
    if (data.t[i] == 0) {
      mu = outcome.theta0[0] + outcome.theta0[1] * p0[i];
      logvar = lambda0;
    } else {
      mu = outcome.theta1[0] + outcome.theta1[1] * p1[i] +
           outcome.theta1[2] * p0[i] + outcome.theta1[3] * p1[i] * p0[i];
      logvar = lambda0 + lambda1 * p1[i];
    }
    const double z = data.y_obs[i] - mu;
    ll += -0.5 * (logvar + z * z * std::exp(-logvar));
  }
  return ll;
}

void step_lambda(const MixtureState& state, OutcomeState& outcome,
                 const ObservedDataset& data, const Hyperparams& hp,
                 RngStream& rng) {
  const double sd = std::sqrt(hp.sigma2_lambda);
  // Proposal equals the prior, so the independence-Metropolis ratio reduces
  // to the likelihood ratio.
  double ll_curr = lambda_log_likelihood(state, outcome, data, outcome.lambda0,
                                         outcome.lambda1);
  const double l0_prop = rng.normal(hp.mu_lambda, sd);
  const double ll0 =
      lambda_log_likelihood(state, outcome, data, l0_prop, outcome.lambda1);
  if (std::log(rng.uniform()) < ll0 - ll_curr) {
    outcome.lambda0 = l0_prop;
    ll_curr = ll0;
  }
  const double l1_prop = rng.normal(hp.mu_lambda, sd);
  // Control terms do not involve lambda1, so the full-data difference equals
  // the treated-units ratio.
  const double ll1 =
      lambda_log_likelihood(state, outcome, data, outcome.lambda0, l1_prop);
  if (std::log(rng.uniform()) < ll1 - ll_curr) {
    outcome.lambda1 = l1_prop;
  }
}

Eigen::VectorXd step_impute_outcome(const MixtureState& state,
                                    const OutcomeState& outcome,
                                    const ObservedDataset& data,
                                    RngStream& rng) {
  const int n = data.n();
  const Eigen::VectorXd p0 = potential_p(state, data, 0);
  const Eigen::VectorXd p1 = potential_p(state, data, 1);
  Eigen::VectorXd y_missing(n);
  for (int i = 0; i < n; ++i) {
    if (data.t[i] == 1) {
      const double mu = outcome.theta0[0] + outcome.theta0[1] * p0[i];
      y_missing[i] = rng.normal(mu, std::exp(0.5 * outcome.lambda0));
    } else {
      const double mu = outcome.theta1[0] + outcome.theta1[1] * p1[i] +
                        outcome.theta1[2] * p0[i] +
                        outcome.theta1[3] * p1[i] * p0[i];
      y_missing[i] =
          rng.normal(mu, std::exp(0.5 * (outcome.lambda0 + outcome.lambda1 * p1[i])));
    }
  }
  return y_missing;
}

PosteriorDraws run_chain(const ObservedDataset& data, const Hyperparams& hp,
                         const GibbsConfig& config) {
  data.validate(true);
  hp.validate();
  config.validate();

  RngStream rng(config.seed);
  auto [state, outcome] = model::init_state(data, hp, rng);

  PosteriorDraws out;
  out.n = data.n();
  out.p = data.p();
  out.L = hp.L;
  out.draws.reserve(config.kept());

  const char* step_name = "init";
  for (int r = 1; r <= config.iterations; ++r) {
    try {
      step_name = "cluster_allocation";
      step_cluster_allocation(state, data, hp, rng);
      step_name = "atoms";
      step_atoms(state, data, hp, rng);
      step_name = "weights";
      step_weights(state, data, hp, config.tmvn_sweeps, rng);
      step_name = "impute_post_treatment";
      step_impute_post_treatment(state, outcome, data, hp, rng);
      step_name = "outcome_params";
      step_outcome_params(state, outcome, data, hp, rng);
      step_name = "lambda";
      step_lambda(state, outcome, data, hp, rng);
    } catch (const numerical_error& e) {
      std::ostringstream oss;
      oss << "chain aborted at iteration " << r << ", step " << step_name
          << ": " << e.what();
      throw numerical_error(oss.str());
    }
    assert(state.all_finite() && outcome.all_finite());

    if (r > config.burn_in && (r - config.burn_in) % config.thin == 0) {
      DrawRecord rec;
      rec.eta = state.eta;
      rec.sigma2 = state.sigma2;
      rec.s0 = state.s0;
      rec.s1 = state.s1;
      rec.p_missing = state.p_missing;
      rec.y_missing = step_impute_outcome(state, outcome, data, rng);
      rec.theta0 = outcome.theta0;
      rec.theta1 = outcome.theta1;
      rec.lambda0 = outcome.lambda0;
      rec.lambda1 = outcome.lambda1;
      rec.stratum.resize(out.n);
      for (int i = 0; i < out.n; ++i) {
        rec.stratum[i] = static_cast<int>(
            strata::assign_stratum(state.s0[i], state.s1[i], state.eta));
      }
      out.draws.push_back(std::move(rec));
    }
    if (config.progress && r % 100 == 0) {
      std::cerr << "[casbah] iteration " << r << "/" << config.iterations
                << "\n";
    }
  }
  return out;
}

}  // namespace casbah::gibbs
