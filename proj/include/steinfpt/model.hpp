#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "steinfpt/errors.hpp"
#include "steinfpt/hash.hpp"
#include "steinfpt/network_spec.hpp"

namespace steinfpt {

/// Extended precision for amplitudes and rates: at n = 1e6 the products
/// alpha a and beta b are ~1e6 and cancel down to mu, which double cannot
/// resolve to 1e-12.
using Real = long double;
using RateVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

/// Finite-n jump model: amplitudes (a_n > 0, b_n < 0) and Poisson rates of
/// the per-component streams N+_j, N-_j and per-cluster streams M+_A, M-_A.
struct SteinParams {
  int n = 1;
  Real a = 1.0;
  Real b = -1.0;
  RateVector alpha;   // N+_j rates, size k
  RateVector beta;    // N-_j rates, size k
  RateVector lambda;  // M+_A rates, one per cluster
  RateVector omega;   // M-_A rates, one per cluster
  Vector x0;
  std::vector<Members> clusters;

  int k() const { return static_cast<int>(alpha.size()); }
  int cluster_count() const { return static_cast<int>(clusters.size()); }
};

/// Limit OU parameters: drift Gamma, noise covariance Psi and its factor.
struct LimitParams {
  Vector gamma;
  Matrix psi;
  Matrix chol;
};

inline void validate(const SteinParams& p) {
  const int k = p.k();
  if (k < 1) throw SpecError("SteinParams: dimension must be positive");
  if (p.beta.size() != k || p.x0.size() != k) {
    throw SpecError("SteinParams: per-component vectors must have size k");
  }
  if (p.lambda.size() != p.cluster_count() ||
      p.omega.size() != p.cluster_count()) {
    throw SpecError("SteinParams: one lambda/omega per cluster required");
  }
  if (!(p.a > 0.0) || !std::isfinite(p.a)) {
    throw SpecError("SteinParams: excitatory amplitude a must be > 0");
  }
  if (!(p.b < 0.0) || !std::isfinite(p.b)) {
    throw SpecError("SteinParams: inhibitory amplitude b must be < 0");
  }
  auto check = [](const RateVector& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(v[i] >= 0.0) || !std::isfinite(v[i])) {
        throw SpecError(std::string("SteinParams: ") + what + "[" +
                        std::to_string(i + 1) + "] must be finite and >= 0");
      }
    }
  };
  check(p.alpha, "alpha");
  check(p.beta, "beta");
  check(p.lambda, "lambda");
  check(p.omega, "omega");
  for (const auto& m : p.clusters) {
    if (m.size() < 2) throw SpecError("SteinParams: cluster with < 2 members");
    for (int j : m) {
      if (j < 0 || j >= k) throw SpecError("SteinParams: member out of range");
    }
  }
}

inline std::string canonical_text(const SteinParams& p) {
  std::string out = "n=" + std::to_string(p.n) + ";a=" + fmt21(p.a) +
                    ";b=" + fmt21(p.b);
  auto vec = [&](const char* name, const auto& v) {
    out += ";";
    out += name;
    out += "=";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) out += ",";
      out += fmt21(v[i]);
    }
  };
  vec("alpha", p.alpha);
  vec("beta", p.beta);
  vec("lambda", p.lambda);
  vec("omega", p.omega);
  vec("x0", p.x0);
  for (const auto& m : p.clusters) out += ";A=" + describe_members(m);
  return out;
}

inline std::string params_hash(const SteinParams& p) {
  return hex64(fnv1a(canonical_text(p)));
}

/// Gamma_j = mu_j + sum over clusters containing j of mu_A.
inline Vector limit_drift(const NetworkSpec& spec) {
  Vector g = spec.mu;
  for (const auto& c : spec.clusters) {
    for (int j : c.members) g[j] += c.mu;
  }
  return g;
}

/// psi_jl = [j == l] sigma2_j + sum over clusters containing j and l of
/// sigma2_A.
inline Matrix limit_covariance(const NetworkSpec& spec) {
  Matrix psi = Matrix::Zero(spec.k, spec.k);
  psi.diagonal() = spec.sigma2;
  for (const auto& c : spec.clusters) {
    for (int j : c.members) {
      for (int l : c.members) psi(j, l) += c.sigma2;
    }
  }
  return psi;
}

/// Lower-triangular L with L L^T = psi.
///
/// Positive semi-definite input is accepted: pivots that vanish up to
/// rounding produce a zero column, which keeps the reconstruction exact for
/// rank-deficient matrices such as cluster-only covariances. A pivot below
/// -1e-8 * max(diag) is rejected with NotPSD.
inline Matrix cholesky_factor(const Matrix& psi) {
  const Eigen::Index k = psi.rows();
  if (psi.cols() != k) throw NotPSD("covariance matrix is not square");
  double max_diag = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    max_diag = std::max(max_diag, std::abs(psi(j, j)));
  }
  const double reject = -1e-8 * max_diag;
  const double negligible = 1e-13 * max_diag;

  Matrix L = Matrix::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double d = psi(j, j);
    for (Eigen::Index m = 0; m < j; ++m) d -= L(j, m) * L(j, m);
    if (d < reject) {
      throw NotPSD("pivot " + std::to_string(j + 1) + " is " + fmt17(d) +
                   "; matrix is not positive semi-definite");
    }
    if (d <= negligible) continue;
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < k; ++i) {
      double r = psi(i, j);
      for (Eigen::Index m = 0; m < j; ++m) r -= L(i, m) * L(j, m);
      L(i, j) = r / ljj;
    }
  }
  return L;
}

inline LimitParams limit_params(const NetworkSpec& spec) {
  LimitParams lp;
  lp.gamma = limit_drift(spec);
  lp.psi = limit_covariance(spec);
  lp.chol = cholesky_factor(lp.psi);
  return lp;
}

/// n -> SteinParams. Any scheme meeting the moment conditions may be used.
using ScalingScheme = std::function<SteinParams(const NetworkSpec&, int)>;

/// Default scheme: a_n = -b_n = 1/n,
///   alpha_j = (mu_j + sigma2_j n / 2) n,   beta_j = sigma2_j n^2 / 2,
///   lambda_A = (mu_A + sigma2_A n / 2) n,  omega_A = sigma2_A n^2 / 2.
/// Throws NegativeRate rather than clamping when mu + sigma2 n / 2 < 0.
inline SteinParams scale_params(const NetworkSpec& spec, int n) {
  if (n < 1) throw SpecError("n must be a positive integer");
  const Real nd = n;
  SteinParams p;
  p.n = n;
  p.a = 1 / nd;
  p.b = -1 / nd;
  p.alpha.resize(spec.k);
  p.beta.resize(spec.k);
  for (int j = 0; j < spec.k; ++j) {
    const Real excit = spec.mu[j] + Real(0.5) * spec.sigma2[j] * nd;
    if (excit < 0) {
      throw NegativeRate(n, "alpha for component " + std::to_string(j + 1) +
                                " (mu + sigma2 n/2 = " + fmt17(double(excit)) + ")");
    }
    p.alpha[j] = excit * nd;
    p.beta[j] = Real(0.5) * spec.sigma2[j] * nd * nd;
  }
  const auto nc = static_cast<Eigen::Index>(spec.clusters.size());
  p.lambda.resize(nc);
  p.omega.resize(nc);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const auto& cl = spec.clusters[c];
    const Real excit = cl.mu + Real(0.5) * cl.sigma2 * nd;
    if (excit < 0) {
      throw NegativeRate(n, "lambda for cluster " + describe_members(cl.members) +
                                " (mu + sigma2 n/2 = " + fmt17(double(excit)) + ")");
    }
    p.lambda[c] = excit * nd;
    p.omega[c] = Real(0.5) * cl.sigma2 * nd * nd;
    p.clusters.push_back(cl.members);
  }
  p.x0 = spec.y0;
  return p;
}

inline const ScalingScheme& default_scheme() {
  static const ScalingScheme scheme = [](const NetworkSpec& s, int n) {
    return scale_params(s, n);
  };
  return scheme;
}

/// First and second moments of the input streams per unit time.
struct SteinMoments {
  Vector mu;              // mu_{j;n} = alpha a + beta b
  Vector sigma2;          // sigma2_{j;n} = alpha a^2 + beta b^2
  Vector cluster_mu;      // mu_{A;n}
  Vector cluster_sigma2;  // sigma2_{A;n}
};

inline SteinMoments stein_moments(const SteinParams& p) {
  SteinMoments m;
  m.mu = (p.alpha * p.a + p.beta * p.b).cast<double>();
  m.sigma2 = (p.alpha * (p.a * p.a) + p.beta * (p.b * p.b)).cast<double>();
  m.cluster_mu = (p.lambda * p.a + p.omega * p.b).cast<double>();
  m.cluster_sigma2 =
      (p.lambda * (p.a * p.a) + p.omega * (p.b * p.b)).cast<double>();
  return m;
}

/// Gamma_{j;n} = mu_{j;n} + sum over clusters containing j of mu_{A;n};
/// the compensator slope of the martingale part Z_n.
inline Vector drift_n(const SteinParams& p) {
  const auto m = stein_moments(p);
  Vector g = m.mu;
  for (int c = 0; c < p.cluster_count(); ++c) {
    for (int j : p.clusters[c]) g[j] += m.cluster_mu[c];
  }
  return g;
}

/// c~_{jl;n} = [j == l] sigma2_{j;n} + sum over clusters containing j, l of
/// sigma2_{A;n}: the second-moment matrix of the Levy measure, i.e.
/// Cov[Z_n(t)] / t exactly for every n.
inline Matrix second_moment_matrix(const SteinParams& p) {
  const auto m = stein_moments(p);
  Matrix c = Matrix::Zero(p.k(), p.k());
  c.diagonal() = m.sigma2;
  for (int a = 0; a < p.cluster_count(); ++a) {
    for (int j : p.clusters[a]) {
      for (int l : p.clusters[a]) c(j, l) += m.cluster_sigma2[a];
    }
  }
  return c;
}

namespace detail {

// rate * (e^{ix} - 1 - ix), evaluated without cancellation in the real part.
inline std::complex<double> compensated_jump(Real rate, Real x) {
  const Real s = std::sin(x / 2);
  return {static_cast<double>(-2 * rate * s * s),
          static_cast<double>(rate * (std::sin(x) - x))};
}

}  // namespace detail

/// Characteristic exponent rho_n(u) of Z_n(1): E exp(i u.Z_n(t)) =
/// exp(t rho_n(u)).
///
/// rho_n(u) = -i sum_j u_j Gamma_{j;n} + sum_j alpha_j (e^{i u_j a} - 1)
///          + sum_j beta_j (e^{i u_j b} - 1) + sum_A lambda_A (e^{i G_A a} - 1)
///          + sum_A omega_A (e^{i G_A b} - 1),   G_A = sum_{j in A} u_j.
///
/// The drift term is distributed over the streams (each stream contributes
/// rate * (e^{ix} - 1 - ix)), which is algebraically identical and avoids
/// O(n) cancellation.
inline std::complex<double> characteristic_exponent(const SteinParams& p,
                                                    const Vector& u) {
  if (u.size() != p.k()) throw OutOfRange("u must have k entries");
  std::complex<double> rho{0.0, 0.0};
  for (int j = 0; j < p.k(); ++j) {
    rho += detail::compensated_jump(p.alpha[j], u[j] * p.a);
    rho += detail::compensated_jump(p.beta[j], u[j] * p.b);
  }
  for (int c = 0; c < p.cluster_count(); ++c) {
    Real g = 0;
    for (int j : p.clusters[c]) g += u[j];
    rho += detail::compensated_jump(p.lambda[c], g * p.a);
    rho += detail::compensated_jump(p.omega[c], g * p.b);
  }
  return rho;
}

/// Moment-condition diagnostics of a scheme along an increasing list of n.
struct AdmissibilityRow {
  int n = 0;
  double max_amplitude = 0.0;  // max(|a_n|, |b_n|)
  double min_rate = 0.0;
  double drift_error = 0.0;     // max |mu_{.;n} - mu_.| over components+clusters
  double variance_error = 0.0;  // max |sigma2_{.;n} - sigma2_.|
};

struct AdmissibilityReport {
  std::vector<AdmissibilityRow> rows;
  bool admissible = true;
  std::string reason;
};

/// Checks numerically, at the given n values, that amplitudes shrink, rates
/// do not decrease and the per-stream moments approach the limit values.
/// Scheme errors (e.g. NegativeRate) propagate.
inline AdmissibilityReport check_admissible(const NetworkSpec& spec,
                                            const ScalingScheme& scheme,
                                            const std::vector<int>& n_values) {
  AdmissibilityReport rep;
  for (int n : n_values) {
    const SteinParams p = scheme(spec, n);
    validate(p);
    const auto m = stein_moments(p);
    AdmissibilityRow row;
    row.n = n;
    row.max_amplitude = static_cast<double>(std::max(std::abs(p.a), std::abs(p.b)));
    row.min_rate = static_cast<double>(std::min(p.alpha.minCoeff(), p.beta.minCoeff()));
    if (p.cluster_count() > 0) {
      row.min_rate = std::min({row.min_rate, static_cast<double>(p.lambda.minCoeff()),
                               static_cast<double>(p.omega.minCoeff())});
    }
    row.drift_error = (m.mu - spec.mu).cwiseAbs().maxCoeff();
    row.variance_error = (m.sigma2 - spec.sigma2).cwiseAbs().maxCoeff();
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      row.drift_error = std::max(
          row.drift_error, std::abs(m.cluster_mu[ci] - spec.clusters[c].mu));
      row.variance_error =
          std::max(row.variance_error,
                   std::abs(m.cluster_sigma2[ci] - spec.clusters[c].sigma2));
    }
    rep.rows.push_back(row);
  }
  constexpr double slack = 1e-12;
  for (std::size_t i = 1; i < rep.rows.size() && rep.admissible; ++i) {
    const auto& prev = rep.rows[i - 1];
    const auto& cur = rep.rows[i];
    if (cur.n <= prev.n) {
      rep.admissible = false;
      rep.reason = "n values must be strictly increasing";
    } else if (cur.max_amplitude > prev.max_amplitude * (1 + slack)) {
      rep.admissible = false;
      rep.reason = "jump amplitudes grow at n=" + std::to_string(cur.n);
    } else if (cur.min_rate < prev.min_rate * (1 - slack)) {
      rep.admissible = false;
      rep.reason = "Poisson rates decrease at n=" + std::to_string(cur.n);
    } else if (cur.drift_error > prev.drift_error + slack * (1 + prev.drift_error)) {
      rep.admissible = false;
      rep.reason = "drift moments diverge at n=" + std::to_string(cur.n);
    } else if (cur.variance_error >
               prev.variance_error + slack * (1 + prev.variance_error)) {
      rep.admissible = false;
      rep.reason = "variance moments diverge at n=" + std::to_string(cur.n);
    }
  }
  return rep;
}

}  // namespace steinfpt
