#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "steinfpt/errors.hpp"
#include "steinfpt/model.hpp"
#include "steinfpt/rng.hpp"

namespace steinfpt {

/// Which Poisson stream produced a jump.
enum class SourceKind : std::uint8_t {
  kUnitExcitatory = 0,     // N+_j
  kUnitInhibitory = 1,     // N-_j
  kClusterExcitatory = 2,  // M+_A
  kClusterInhibitory = 3,  // M-_A
};

inline const char* source_tag(SourceKind s) {
  switch (s) {
    case SourceKind::kUnitExcitatory: return "N+";
    case SourceKind::kUnitInhibitory: return "N-";
    case SourceKind::kClusterExcitatory: return "M+";
    case SourceKind::kClusterInhibitory: return "M-";
  }
  return "?";
}

inline bool is_cluster_source(SourceKind s) {
  return s == SourceKind::kClusterExcitatory ||
         s == SourceKind::kClusterInhibitory;
}

struct JumpEvent {
  double time = 0.0;
  SourceKind source = SourceKind::kUnitExcitatory;
  int index = 0;  // component j for N streams, cluster position for M streams
  double amplitude = 0.0;

  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

/// One realization of the Stein process on [0, horizon]: the initial state
/// plus every input event. Values at any time follow from evaluate().
struct JumpPath {
  Vector x0;
  double theta = 1.0;
  double horizon = 0.0;
  std::vector<Members> clusters;
  std::vector<JumpEvent> events;

  int k() const { return static_cast<int>(x0.size()); }

  /// Calls fn(j) for every component receiving the event's amplitude.
  template <typename Fn>
  void for_each_affected(const JumpEvent& e, Fn&& fn) const {
    if (is_cluster_source(e.source)) {
      for (int j : clusters.at(static_cast<std::size_t>(e.index))) fn(j);
    } else {
      fn(e.index);
    }
  }

  std::vector<int> affected(const JumpEvent& e) const {
    std::vector<int> out;
    for_each_affected(e, [&](int j) { out.push_back(j); });
    return out;
  }
};

inline constexpr std::size_t kDefaultEventBudget = 100'000'000;

/// The 2k + 2|A| input streams of a SteinParams, superposed into one clock.
class StreamTable {
 public:
  struct Stream {
    SourceKind source;
    int index;
    double amplitude;
    double rate;
  };

  explicit StreamTable(const SteinParams& p) : clusters_(p.clusters) {
    validate(p);
    for (int j = 0; j < p.k(); ++j) {
      add(SourceKind::kUnitExcitatory, j, p.a, p.alpha[j]);
      add(SourceKind::kUnitInhibitory, j, p.b, p.beta[j]);
    }
    for (int c = 0; c < p.cluster_count(); ++c) {
      add(SourceKind::kClusterExcitatory, c, p.a, p.lambda[c]);
      add(SourceKind::kClusterInhibitory, c, p.b, p.omega[c]);
    }
    if (total_rate_ > 0.0) {
      std::vector<double> w;
      w.reserve(streams_.size());
      for (const auto& s : streams_) w.push_back(s.rate);
      pick_ = std::discrete_distribution<int>(w.begin(), w.end());
      wait_ = std::exponential_distribution<double>(total_rate_);
    }
  }

  double total_rate() const { return total_rate_; }
  const std::vector<Stream>& streams() const { return streams_; }

  /// Time to the next event of the superposed process; +inf if all rates
  /// vanish.
  double draw_wait(Rng& rng) {
    if (total_rate_ <= 0.0) return std::numeric_limits<double>::infinity();
    return wait_(rng);
  }

  const Stream& draw_source(Rng& rng) {
    return streams_[static_cast<std::size_t>(pick_(rng))];
  }

  /// Calls fn(j) for every component the stream drives.
  template <typename Fn>
  void for_each_target(const Stream& s, Fn&& fn) const {
    if (is_cluster_source(s.source)) {
      for (int j : clusters_[static_cast<std::size_t>(s.index)]) fn(j);
    } else {
      fn(s.index);
    }
  }

 private:
  void add(SourceKind source, int index, Real amplitude, Real rate) {
    Stream s{source, index, static_cast<double>(amplitude),
             static_cast<double>(rate)};
    streams_.push_back(s);
    total_rate_ += s.rate;
  }

  std::vector<Members> clusters_;
  std::vector<Stream> streams_;
  double total_rate_ = 0.0;
  std::discrete_distribution<int> pick_;
  std::exponential_distribution<double> wait_;
};

/// Exact event-driven simulation on [0, horizon] by superposition: one
/// Exponential(total rate) clock, source chosen with probability rate/total.
inline JumpPath simulate_stein(const SteinParams& p, double theta,
                               double horizon, Rng& rng,
                               std::size_t event_budget = kDefaultEventBudget) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw OutOfRange("horizon must be positive and finite");
  }
  if (!(theta > 0.0)) throw SpecError("theta must be positive");
  StreamTable table(p);
  JumpPath path;
  path.x0 = p.x0;
  path.theta = theta;
  path.horizon = horizon;
  path.clusters = p.clusters;

  double t = 0.0;
  for (;;) {
    t += table.draw_wait(rng);
    if (!(t <= horizon)) break;
    const auto& s = table.draw_source(rng);
    if (path.events.size() >= event_budget) {
      throw EventBudgetExceeded("more than " + std::to_string(event_budget) +
                                " events before the horizon");
    }
    path.events.push_back({t, s.source, s.index, s.amplitude});
  }
  return path;
}

/// X(t) for each t in `times` (non-decreasing, within [0, horizon]) in one
/// sweep. Right-continuous: an event at time t is included in X(t).
inline std::vector<Vector> evaluate_grid(const JumpPath& path,
                                         std::span<const double> times) {
  std::vector<Vector> out;
  out.reserve(times.size());
  Vector x = path.x0;
  double t_last = 0.0;
  std::size_t e = 0;
  double prev_query = 0.0;
  for (double tq : times) {
    if (!(tq >= 0.0 && tq <= path.horizon)) {
      throw OutOfRange("evaluation time " + fmt17(tq) + " outside [0, " +
                       fmt17(path.horizon) + "]");
    }
    if (tq < prev_query) throw OutOfRange("evaluation times must be sorted");
    prev_query = tq;
    while (e < path.events.size() && path.events[e].time <= tq) {
      const auto& ev = path.events[e];
      x *= std::exp(-(ev.time - t_last) / path.theta);
      t_last = ev.time;
      path.for_each_affected(ev, [&](int j) { x[j] += ev.amplitude; });
      ++e;
    }
    out.push_back(x * std::exp(-(tq - t_last) / path.theta));
  }
  return out;
}

inline Vector evaluate(const JumpPath& path, double t) {
  const double times[1] = {t};
  return evaluate_grid(path, times).front();
}

/// Z_n(t): amplitudes received by each component up to t (inclusive) minus
/// the compensator Gamma_{j;n} t.
inline Vector martingale_part(const JumpPath& path, const SteinParams& p,
                              double t) {
  if (!(t >= 0.0 && t <= path.horizon)) {
    throw OutOfRange("time " + fmt17(t) + " outside [0, " +
                     fmt17(path.horizon) + "]");
  }
  Vector z = Vector::Zero(path.k());
  for (const auto& ev : path.events) {
    if (ev.time > t) break;
    path.for_each_affected(ev, [&](int j) { z[j] += ev.amplitude; });
  }
  return z - drift_n(p) * t;
}

/// Draws Z_n(t) directly from the Poisson counts of each stream over
/// [0, t]. Same law as martingale_part(simulate_stein(...), p, t) at O(k + |A|)
/// cost instead of O(events).
inline Vector sample_martingale_part(const SteinParams& p, double t,
                                     Rng& rng) {
  validate(p);
  auto count = [&](Real rate) -> Real {
    const double mean = static_cast<double>(rate) * t;
    if (mean <= 0.0) return 0;
    std::poisson_distribution<long long> pois(mean);
    return static_cast<Real>(pois(rng));
  };
  Vector z = -drift_n(p) * t;
  for (int j = 0; j < p.k(); ++j) {
    z[j] += static_cast<double>(p.a * count(p.alpha[j]) + p.b * count(p.beta[j]));
  }
  for (int c = 0; c < p.cluster_count(); ++c) {
    const auto jump =
        static_cast<double>(p.a * count(p.lambda[c]) + p.b * count(p.omega[c]));
    for (int j : p.clusters[static_cast<std::size_t>(c)]) z[j] += jump;
  }
  return z;
}

/// X(t) from the same superposition construction as simulate_stein without
/// storing the event list.
inline Vector sample_stein_state(const SteinParams& p, double theta, double t,
                                 Rng& rng) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw OutOfRange("t must be >= 0");
  StreamTable table(p);
  Vector x = p.x0;
  double now = 0.0;
  for (;;) {
    const double next = now + table.draw_wait(rng);
    if (!(next <= t)) break;
    const auto& s = table.draw_source(rng);
    x *= std::exp(-(next - now) / theta);
    now = next;
    table.for_each_target(s, [&](int j) { x[j] += s.amplitude; });
  }
  return x * std::exp(-(t - now) / theta);
}

}  // namespace steinfpt
