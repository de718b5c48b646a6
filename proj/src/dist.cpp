#include "casbah/dist.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "casbah/errors.hpp"

namespace casbah::dist {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

void require(bool ok, const std::string& msg) {
  if (!ok) throw input_error(msg);
}

// Adaptive Simpson on [a,b]; integrands here are smooth and bounded.
inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return adaptive_simpson(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol,
                          48);
}

}  // namespace

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * kPi));
}

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_log_cdf(double x) {
  if (x > -20.0) return std::log(0.5 * std::erfc(-x / kSqrt2));
  // Tail expansion: log Phi(x) = log phi(x) - log(-x) + log(1 - 1/x^2 + ...)
  const double x2 = x * x;
  const double series =
      1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

double bvn_cdf(double a, double b, double rho) {
  require(rho >= -1.0 && rho <= 1.0, "bvn_cdf: rho outside [-1,1]");
  require(!std::isnan(a) && !std::isnan(b), "bvn_cdf: NaN argument");
  if (std::isinf(a) && a > 0) return normal_cdf(b);
  if (std::isinf(b) && b > 0) return normal_cdf(a);
  if (std::isinf(a) || std::isinf(b)) return 0.0;  // either one at -inf
  if (rho >= 1.0) return normal_cdf(std::min(a, b));
  if (rho <= -1.0) return std::max(0.0, normal_cdf(a) + normal_cdf(b) - 1.0);
  // Phi2(a,b,rho) = Phi(a)Phi(b)
  //   + (1/2pi) int_0^{asin rho} exp(-(a^2 - 2ab sin t + b^2)/(2 cos^2 t)) dt
  const auto integrand = [a, b](double t) {
    const double s = std::sin(t);
    const double c2 = 1.0 - s * s;
    return std::exp(-(a * a - 2.0 * a * b * s + b * b) / (2.0 * c2));
  };
  const double upper = std::asin(rho);
  const double corr = integrate(integrand, 0.0, upper, 1e-12) / (2.0 * kPi);
  const double v = normal_cdf(a) * normal_cdf(b) + corr;
  return std::min(1.0, std::max(0.0, v));
}

// AS 241 (Wichura), accurate to ~1e-16 over the representable range.
double normal_quantile_impl(double p) {
  const double q = p - 0.5;
  double r, num, den;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                6.7265770927008700853e+4) *
                   r +
               4.5921953931549871457e+4) *
                  r +
              1.3731693765509461125e+4) *
                 r +
             1.9715909503065514427e+3) *
                r +
            1.3314166789178437745e+2) *
               r +
           3.3871328727963666080e+0);
    den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                3.9307895800092710610e+4) *
                   r +
               2.1213794301586595867e+4) *
                  r +
              5.3941960214247511077e+3) *
                 r +
             6.8718700749205790830e+2) *
                r +
            4.2313330701600911252e+1) *
               r +
           1.0);
    return q * num / den;
  }
  r = (q < 0.0) ? p : 1.0 - p;
  if (r <= 0.0) {
    return (q < 0.0) ? -std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::infinity();
  }
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) *
                    r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e+0) *
                  r +
              3.64784832476320460504e+0) *
                 r +
             5.76949722146069140550e+0) *
                r +
            4.63033784615654529590e+0) *
               r +
           1.42343711074968357734e+0);
    den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) *
                    r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e+0) *
                r +
            2.05319162663775882187e+0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) *
                    r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e+0) *
                r +
            5.46378491116411436990e+0) *
               r +
           6.65790464350110377720e+0);
    den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) *
                    r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  x = num / den;
  return (q < 0.0) ? -x : x;
}

double sample_trunc_normal_lower(double mean, double sd, double lower,
                                 RngStream& rng) {
  if (std::isinf(lower) && lower < 0.0) return mean + sd * rng.normal();
  const double a = (lower - mean) / sd;
  double z;
  if (a <= 5.0) {
    // z = Q^-1(u Q(a)) where Q is the standard-normal survival function.
    const double tail = normal_cdf(-a);
    z = -normal_quantile_impl(rng.uniform() * tail);
  } else {
    // Robert's one-sided exponential rejection.
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      z = a + rng.exponential() / lambda;
      const double d = z - lambda;
      if (std::log(rng.uniform()) <= -0.5 * d * d) break;
    }
  }
  if (z < a) z = a;
  return std::max(mean + sd * z, lower);
}

int sample_categorical(const Eigen::VectorXd& weights, RngStream& rng) {
  require(weights.size() > 0, "sample_categorical: empty weights");
  double total = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0 && std::isfinite(weights[i]),
            "sample_categorical: weights must be finite and nonnegative");
    total += weights[i];
  }
  require(total > 0.0, "sample_categorical: all weights zero");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u <= acc) return i;
  }
  return static_cast<int>(weights.size()) - 1;
}

int sample_categorical_log(const Eigen::VectorXd& log_weights, RngStream& rng) {
  require(log_weights.size() > 0, "sample_categorical_log: empty weights");
  const double m = log_weights.maxCoeff();
  Eigen::VectorXd w = (log_weights.array() - m).exp();
  return sample_categorical(w, rng);
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, double neg_tol) {
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double jitter = 1e-8;
  Eigen::MatrixXd jittered =
      sym + jitter * Eigen::MatrixXd::Identity(sym.rows(), sym.cols());
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -neg_tol) {
    std::ostringstream oss;
    oss << "psd_factor: matrix indefinite, min eigenvalue " << min_eig
        << " below tolerance -" << neg_tol << " (dim " << sym.rows() << ")";
    throw numerical_error(oss.str());
  }
  Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clamped.cwiseSqrt().asDiagonal();
}

Eigen::VectorXd sample_mvn(const MvnParams& params, RngStream& rng) {
  const auto q = params.mean.size();
  require(params.covariance.rows() == q && params.covariance.cols() == q,
          "sample_mvn: dimension mismatch");
  require(params.mean.allFinite() && params.covariance.allFinite(),
          "sample_mvn: non-finite entries");
  Eigen::MatrixXd f = psd_factor(params.covariance, 1e-10);
  Eigen::VectorXd z(q);
  for (int i = 0; i < q; ++i) z[i] = rng.normal();
  return params.mean + f * z;
}

Eigen::VectorXd sample_trunc_mvn(const TruncMvnParams& params, RngStream& rng,
                                 int sweeps) {
  const auto h = params.mean.size();
  require(h > 0, "sample_trunc_mvn: empty mean");
  require(params.lower_bounds.size() == h, "sample_trunc_mvn: bounds length");
  require(params.covariance.rows() == h && params.covariance.cols() == h,
          "sample_trunc_mvn: covariance dimensions");
  require(params.mean.allFinite() && params.covariance.allFinite(),
          "sample_trunc_mvn: non-finite entries");
  for (int i = 0; i < h; ++i) {
    require(!std::isnan(params.lower_bounds[i]) &&
                !(std::isinf(params.lower_bounds[i]) &&
                  params.lower_bounds[i] > 0),
            "sample_trunc_mvn: invalid lower bound");
  }
  require(sweeps >= 1, "sample_trunc_mvn: sweeps must be >= 1");

  if (h == 1) {
    Eigen::VectorXd out(1);
    out[0] = sample_trunc_normal_lower(params.mean[0],
                                       std::sqrt(params.covariance(0, 0)),
                                       params.lower_bounds[0], rng);
    return out;
  }

  // Precision matrix, with 1e-8*I jitter if the covariance is borderline.
  Eigen::MatrixXd sym = 0.5 * (params.covariance + params.covariance.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    sym += 1e-8 * Eigen::MatrixXd::Identity(h, h);
    llt.compute(sym);
    if (llt.info() != Eigen::Success) {
      throw numerical_error("sample_trunc_mvn: covariance not SPD after jitter");
    }
  }
  Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(h, h));

  constexpr double kStartEps = 1e-8;
  Eigen::VectorXd x(h);
  for (int i = 0; i < h; ++i) {
    const double lb = params.lower_bounds[i];
    x[i] = std::isinf(lb) ? params.mean[i]
                          : std::max(params.mean[i], lb + kStartEps);
  }
  Eigen::VectorXd v = prec * (x - params.mean);  // maintained incrementally

  for (int s = 0; s < sweeps; ++s) {
    for (int j = 0; j < h; ++j) {
      const double pjj = prec(j, j);
      const double cond_sd = 1.0 / std::sqrt(pjj);
      const double cm =
          params.mean[j] - (v[j] - pjj * (x[j] - params.mean[j])) / pjj;
      const double nx =
          sample_trunc_normal_lower(cm, cond_sd, params.lower_bounds[j], rng);
      const double delta = nx - x[j];
      if (delta != 0.0) {
        v += prec.col(j) * delta;
        x[j] = nx;
      }
    }
  }
  for (int i = 0; i < h; ++i) {
    if (x[i] < params.lower_bounds[i]) x[i] = params.lower_bounds[i];
  }
  return x;
}

Eigen::VectorXd sample_sun(const SunParams& params, RngStream& rng,
                           int sweeps) {
  const auto q = params.xi.size();
  const auto h = params.gamma.size();
  require(params.omega_scale.size() == q, "sample_sun: omega_scale length");
  require((params.omega_scale.array() > 0.0).all(),
          "sample_sun: omega_scale must be positive");
  require(params.delta.rows() == q && params.delta.cols() == h,
          "sample_sun: delta dimensions");
  require(params.gamma_cov.rows() == h && params.gamma_cov.cols() == h,
          "sample_sun: gamma_cov dimensions");
  require(params.xi.allFinite() && params.delta.allFinite() &&
              params.gamma.allFinite() && params.gamma_cov.allFinite(),
          "sample_sun: non-finite entries");

  Eigen::VectorXd skew = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd b0_cov = Eigen::MatrixXd::Identity(q, q);
  if (h > 0) {
    TruncMvnParams tp;
    tp.lower_bounds = -params.gamma;
    tp.mean = Eigen::VectorXd::Zero(h);
    tp.covariance = params.gamma_cov;
    Eigen::VectorXd b1 = sample_trunc_mvn(tp, rng, sweeps);

    Eigen::MatrixXd sym =
        0.5 * (params.gamma_cov + params.gamma_cov.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() != Eigen::Success) {
      sym += 1e-8 * Eigen::MatrixXd::Identity(h, h);
      llt.compute(sym);
      if (llt.info() != Eigen::Success) {
        throw numerical_error("sample_sun: gamma_cov not SPD after jitter");
      }
    }
    skew = params.delta * llt.solve(b1);
    b0_cov -= params.delta * llt.solve(params.delta.transpose());
  }

  Eigen::MatrixXd f = psd_factor(b0_cov, 1e-6);
  Eigen::VectorXd z(q);
  for (int i = 0; i < q; ++i) z[i] = rng.normal();
  return params.xi + params.omega_scale.cwiseProduct(f * z + skew);
}

}  // namespace casbah::dist

namespace casbah {
double normal_quantile(double p) { return dist::normal_quantile_impl(p); }
}  // namespace casbah
