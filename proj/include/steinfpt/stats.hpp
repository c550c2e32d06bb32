#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "steinfpt/errors.hpp"
#include "steinfpt/fpt_reset.hpp"
#include "steinfpt/model.hpp"

namespace steinfpt {

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
///
/// Merge-scan over the sorted samples; at a tied value both ECDFs are
/// advanced past every copy before the difference is taken.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptySample("ks_distance: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx -
                             static_cast<double>(j) / ny));
  }
  return d;
}

/// One-sample KS statistic against a continuous CDF.
inline double ks_distance_to_cdf(std::span<const double> a,
                                 const std::function<double(double)>& cdf) {
  if (a.empty()) throw EmptySample("ks_distance_to_cdf: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f,
                  f - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic two-sample KS critical value at significance `alpha`.
inline double ks_critical_value(std::size_t m, std::size_t n, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  return c * std::sqrt((md + nd) / (md * nd));
}

/// Wasserstein-1 distance between the empirical laws: the L1 distance of
/// the two ECDFs.
inline double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptySample("wasserstein1: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(x.front(), y.front());
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    const double v = (j == y.size() || (i < x.size() && x[i] <= y[j])) ? x[i] : y[j];
    total += std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny) *
             (v - prev);
    prev = v;
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
  }
  return total;
}

inline double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

inline double sample_mean(std::span<const double> v) {
  if (v.empty()) throw EmptySample("sample_mean: empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw InsufficientReplications("variance needs >= 2 values");
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// ---------------------------------------------------------------------------
// Marks

/// Empirical law of the mark sets: relative frequency per set.
using MarkTable = std::map<Marks, double>;

inline MarkTable normalize(const std::map<Marks, std::size_t>& counts) {
  std::size_t total = 0;
  for (const auto& [m, c] : counts) total += c;
  MarkTable out;
  if (total == 0) return out;
  for (const auto& [m, c] : counts) {
    out[m] = static_cast<double>(c) / static_cast<double>(total);
  }
  return out;
}

/// (1/2) sum_s |p_a(s) - p_b(s)| over the union of observed mark sets.
inline double total_variation_marks(const MarkTable& a, const MarkTable& b) {
  double s = 0.0;
  for (const auto& [m, p] : a) {
    const auto it = b.find(m);
    s += std::abs(p - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [m, p] : b) {
    if (!a.contains(m)) s += p;
  }
  return 0.5 * s;
}

inline double non_singleton_mass(const MarkTable& t) {
  double s = 0.0;
  for (const auto& [m, p] : t) {
    if (m.size() > 1) s += p;
  }
  return s;
}

struct MarkComparison {
  double tv = 0.0;
  double non_singleton_a = 0.0;
  bool residual_simultaneity = false;  // compared on full set support
};

/// Compares a jump-process mark law (sets) with a diffusion mark law
/// (singletons). Below `collapse_threshold` the non-singleton mass of `a` is
/// dropped and its singleton part renormalized; otherwise the comparison
/// runs on the full set support and flags residual simultaneity.
inline MarkComparison compare_marks(const MarkTable& a, const MarkTable& b,
                                    double collapse_threshold = 1e-3) {
  MarkComparison out;
  out.non_singleton_a = non_singleton_mass(a);
  if (out.non_singleton_a < collapse_threshold && out.non_singleton_a < 1.0) {
    MarkTable singles;
    for (const auto& [m, p] : a) {
      if (m.size() == 1) singles[m] = p / (1.0 - out.non_singleton_a);
    }
    out.tv = total_variation_marks(singles, b);
  } else {
    out.residual_simultaneity = true;
    out.tv = total_variation_marks(a, b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Martingale-part moments

struct CovarianceEstimate {
  Matrix cov;  // empirical Cov[Z(t)] / t
  Matrix se;   // jackknife standard errors
};

/// Empirical Cov[Z(t)]/t over replications with jackknife standard errors.
inline CovarianceEstimate covariance_rate(std::span<const Vector> samples,
                                          double t) {
  if (samples.size() < 2) {
    throw InsufficientReplications("covariance_rate needs >= 2 replications");
  }
  if (!(t > 0.0)) throw OutOfRange("covariance_rate: t must be > 0");
  const auto k = samples.front().size();
  const auto N = static_cast<double>(samples.size());

  Vector mean = Vector::Zero(k);
  for (const auto& z : samples) mean += z;
  mean /= N;
  // Centered sums; leave-one-out estimates follow in closed form.
  Vector s1 = Vector::Zero(k);
  Matrix s2 = Matrix::Zero(k, k);
  for (const auto& z : samples) {
    const Vector c = z - mean;
    s1 += c;
    s2 += c * c.transpose();
  }
  CovarianceEstimate est;
  est.cov = (s2 - s1 * s1.transpose() / N) / (N - 1.0) / t;
  est.se = Matrix::Zero(k, k);
  if (samples.size() < 3) return est;

  Matrix sum_loo = Matrix::Zero(k, k);
  Matrix sum_loo2 = Matrix::Zero(k, k);
  const double m = N - 1.0;
  for (const auto& z : samples) {
    const Vector c = z - mean;
    const Vector r1 = s1 - c;
    const Matrix loo = (s2 - c * c.transpose() - r1 * r1.transpose() / m) /
                       (m - 1.0) / t;
    sum_loo += loo;
    sum_loo2 += loo.cwiseProduct(loo);
  }
  const Matrix mean_loo = sum_loo / N;
  const Matrix var = sum_loo2 / N - mean_loo.cwiseProduct(mean_loo);
  est.se = (var.cwiseMax(0.0) * (N - 1.0)).cwiseSqrt();
  return est;
}

struct EcfCheck {
  double max_deviation = 0.0;           // vs exp(t rho_n(u))
  double max_deviation_gaussian = 0.0;  // vs exp(-t u.Psi.u / 2)
};

/// Empirical characteristic function of Z_n(t) against the exact finite-n
/// law and the Gaussian limit, maximized over the u-grid.
inline EcfCheck ecf_check(std::span<const Vector> samples, const SteinParams& p,
                          double t, std::span<const Vector> u_grid,
                          const Matrix& psi) {
  if (samples.empty()) throw EmptySample("ecf_check: no samples");
  EcfCheck out;
  const double N = static_cast<double>(samples.size());
  for (const auto& u : u_grid) {
    double re = 0.0, im = 0.0;
    for (const auto& z : samples) {
      const double phase = u.dot(z);
      re += std::cos(phase);
      im += std::sin(phase);
    }
    const std::complex<double> ecf{re / N, im / N};
    const auto exact = std::exp(t * characteristic_exponent(p, u));
    const double gauss = std::exp(-0.5 * t * u.dot(psi * u));
    out.max_deviation = std::max(out.max_deviation, std::abs(ecf - exact));
    out.max_deviation_gaussian =
        std::max(out.max_deviation_gaussian, std::abs(ecf - gauss));
  }
  return out;
}

/// Lag-1 Spearman rank autocorrelation and its z-score under independence.
struct RankAutocorrelation {
  double rho = 0.0;
  double z = 0.0;
};

inline RankAutocorrelation rank_autocorrelation(std::span<const double> v) {
  if (v.size() < 4) throw InsufficientReplications("need >= 4 values");
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t r = 0; r < idx.size(); ++r) rank[idx[r]] = static_cast<double>(r);
  const std::span<const double> x(rank.data(), rank.size() - 1);
  const std::span<const double> y(rank.data() + 1, rank.size() - 1);
  const double mx = sample_mean(x), my = sample_mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  RankAutocorrelation out;
  out.rho = sxy / std::sqrt(sxx * syy);
  out.z = out.rho * std::sqrt(static_cast<double>(v.size()));
  return out;
}

}  // namespace steinfpt
