#pragma once

#include <cmath>
#include <random>
#include <string>

#include "steinfpt/errors.hpp"
#include "steinfpt/model.hpp"
#include "steinfpt/rng.hpp"

namespace steinfpt {

/// OU path sampled on the grid 0, h, ..., m h; row i holds Y(i h).
struct GridPath {
  Vector y0;
  double h = 0.0;
  Matrix states;  // (m + 1) x k

  Eigen::Index steps() const { return states.rows() - 1; }
  double time(Eigen::Index i) const { return static_cast<double>(i) * h; }
};

enum class OuScheme { kExact, kEulerMaruyama };

inline const char* scheme_tag(OuScheme s) {
  return s == OuScheme::kExact ? "exact" : "euler";
}

struct GaussianLaw {
  Vector mean;
  Matrix cov;
};

/// Law of Y(t + h) given Y(t) = y for dY = (-Y/theta + Gamma) dt + dW,
/// Cov[W(1)] = Psi. Exact because the drift matrix is the scalar 1/theta:
///   mean = y e^{-h/theta} + Gamma theta (1 - e^{-h/theta})
///   cov  = Psi (theta/2) (1 - e^{-2h/theta}).
inline GaussianLaw ou_step_law(const LimitParams& lp, double theta,
                               const Vector& y, double h) {
  if (!(h >= 0.0)) throw OutOfRange("step must be non-negative");
  const double decay = std::exp(-h / theta);
  GaussianLaw law;
  law.mean = y * decay - lp.gamma * (theta * std::expm1(-h / theta));
  law.cov = lp.psi * (-0.5 * theta * std::expm1(-2.0 * h / theta));
  return law;
}

/// Precomputed one-step transition for a fixed (Psi, theta, h).
class OuStepKernel {
 public:
  OuStepKernel(const LimitParams& lp, double theta, double h,
               OuScheme scheme = OuScheme::kExact)
      : theta_(theta), h_(h), scheme_(scheme), gamma_(lp.gamma) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw OutOfRange("grid step must be positive and finite");
    }
    if (!(theta > 0.0)) throw SpecError("theta must be positive");
    if (scheme == OuScheme::kExact) {
      decay_ = std::exp(-h / theta);
      drift_ = -lp.gamma * (theta * std::expm1(-h / theta));
      var_scale_ = -0.5 * theta * std::expm1(-2.0 * h / theta);
    } else {
      decay_ = 1.0 - h / theta;
      drift_ = lp.gamma * h;
      var_scale_ = h;
    }
    factor_ = cholesky_factor(lp.psi) * std::sqrt(var_scale_);
    noise_.resize(lp.gamma.size());
  }

  double h() const { return h_; }
  double theta() const { return theta_; }
  double decay() const { return decay_; }
  /// Scalar s with step covariance Psi * s.
  double variance_scale() const { return var_scale_; }
  const Matrix& factor() const { return factor_; }
  OuScheme scheme() const { return scheme_; }

  Vector mean(const Vector& y) const { return y * decay_ + drift_; }

  /// y <- mean(y) + L_h xi.
  void advance(Vector& y, Rng& rng) {
    for (Eigen::Index i = 0; i < noise_.size(); ++i) noise_[i] = normal_(rng);
    y = y * decay_ + drift_ + factor_ * noise_;
  }

 private:
  double theta_;
  double h_;
  OuScheme scheme_;
  Vector gamma_;
  double decay_ = 1.0;
  Vector drift_;
  double var_scale_ = 0.0;
  Matrix factor_;
  Vector noise_;
  std::normal_distribution<double> normal_;
};

/// Iterates the transition from y0 for ceil(horizon / h) steps. With the
/// exact scheme the marginal law at every grid point is the OU law.
inline GridPath simulate_ou(const LimitParams& lp, double theta,
                            const Vector& y0, double horizon, double h,
                            Rng& rng, OuScheme scheme = OuScheme::kExact) {
  if (!(h > 0.0) || !(horizon >= h) || !std::isfinite(horizon)) {
    throw OutOfRange("need h > 0 and horizon >= h");
  }
  OuStepKernel kernel(lp, theta, h, scheme);
  const auto m = static_cast<Eigen::Index>(std::ceil(horizon / h - 1e-9));
  GridPath path;
  path.y0 = y0;
  path.h = h;
  path.states.resize(m + 1, y0.size());
  Vector y = y0;
  path.states.row(0) = y.transpose();
  for (Eigen::Index i = 1; i <= m; ++i) {
    kernel.advance(y, rng);
    path.states.row(i) = y.transpose();
  }
  return path;
}

/// Deterministic (zero-noise) solution y0 e^{-t/theta} + Gamma theta (1 -
/// e^{-t/theta}).
inline Vector fluid_solution(const Vector& gamma, double theta,
                             const Vector& y0, double t) {
  return y0 * std::exp(-t / theta) - gamma * (theta * std::expm1(-t / theta));
}

/// Fluid solution on the grid of `like`, same shape as a simulated path.
inline GridPath fluid_path(const Vector& gamma, double theta, const GridPath& like) {
  GridPath out{like.y0, like.h, Matrix(like.states.rows(), like.states.cols())};
  for (Eigen::Index i = 0; i < out.states.rows(); ++i) {
    out.states.row(i) = fluid_solution(gamma, theta, like.y0, out.time(i)).transpose();
  }
  return out;
}

}  // namespace steinfpt
