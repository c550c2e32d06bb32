#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "steinfpt/steinfpt.hpp"

namespace testing_support {

using steinfpt::Cluster;
using steinfpt::Matrix;
using steinfpt::NetworkSpec;
using steinfpt::Vector;

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline steinfpt::RateVector rvec(std::initializer_list<double> v) {
  return vec(v).cast<steinfpt::Real>();
}

/// Spec with given drifts/variances, boundaries at +inf, zero start.
inline NetworkSpec make_spec(std::initializer_list<double> mu,
                             std::initializer_list<double> sigma2) {
  auto s = NetworkSpec::zeros(static_cast<int>(mu.size()));
  s.mu = vec(mu);
  s.sigma2 = vec(sigma2);
  return s;
}

inline NetworkSpec& add_cluster(NetworkSpec& s, steinfpt::Members m, double mu,
                                double sigma2) {
  s.clusters.push_back({std::move(m), mu, sigma2});
  return s;
}

/// Random valid spec: k in [1, kmax], random clusters, finite boundaries.
inline NetworkSpec random_spec(std::mt19937_64& rng, int kmax = 5) {
  std::uniform_int_distribution<int> kd(1, kmax);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = kd(rng);
  auto s = NetworkSpec::zeros(k);
  s.theta = 0.2 + 2.0 * u(rng);
  for (int j = 0; j < k; ++j) {
    s.mu[j] = 4.0 * u(rng) - 1.0;
    s.sigma2[j] = u(rng) < 0.2 ? 0.0 : 2.0 * u(rng);
    s.boundary[j] = 0.5 + u(rng);
  }
  std::set<steinfpt::Members> seen;
  const int nc = k >= 2 ? std::uniform_int_distribution<int>(0, 3)(rng) : 0;
  for (int c = 0; c < nc; ++c) {
    steinfpt::Members m;
    for (int j = 0; j < k; ++j) {
      if (u(rng) < 0.6) m.push_back(j);
    }
    if (m.size() < 2 || seen.contains(m)) continue;
    seen.insert(m);
    s.clusters.push_back({m, 2.0 * u(rng) - 0.5, u(rng) < 0.2 ? 0.0 : u(rng)});
  }
  return s;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testing_support
