#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "steinfpt/errors.hpp"
#include "steinfpt/model.hpp"
#include "steinfpt/network_spec.hpp"
#include "steinfpt/ou_sim.hpp"
#include "steinfpt/rng.hpp"
#include "steinfpt/stein_sim.hpp"

namespace steinfpt {

/// Sorted zero-based indices of the components crossing at one instant.
using Marks = std::vector<int>;

/// One window of the reset construction, ending at the first crossing.
struct SpikeRecord {
  double tau = 0.0;              // window duration
  double cumulative_time = 0.0;  // sum of tau over windows 1..i
  Marks marks;
  Vector pre_state;   // state at the crossing, before reset
  Vector post_state;  // state after reset; start of the next window
};

struct GeneratorTag {
  enum class Kind { kStein, kOu };
  Kind kind = Kind::kStein;
  int n = 0;
  double h = 0.0;
  bool bridge = false;

  static GeneratorTag stein(int n) { return {Kind::kStein, n, 0.0, false}; }
  static GeneratorTag ou(double h, bool bridge) {
    return {Kind::kOu, 0, h, bridge};
  }

  std::string str() const {
    if (kind == Kind::kStein) return "stein(n=" + std::to_string(n) + ")";
    return "ou(h=" + fmt17(h) + (bridge ? ",bridge)" : ")");
  }
};

/// Ends a train after max_spikes records or when the next crossing would
/// fall beyond `horizon`, whichever comes first.
struct StopCondition {
  std::size_t max_spikes = std::numeric_limits<std::size_t>::max();
  double horizon = std::numeric_limits<double>::infinity();

  static StopCondition spikes(std::size_t n) { return {n, INFINITY}; }
  static StopCondition until(double t) {
    return {std::numeric_limits<std::size_t>::max(), t};
  }
  bool bounded_spikes() const {
    return max_spikes != std::numeric_limits<std::size_t>::max();
  }
};

struct MarkedTrain {
  std::vector<SpikeRecord> records;
  std::string spec_hash;
  GeneratorTag generator;
  std::uint64_t seed = 0;
  StopCondition stop;
  /// OU only: grid steps where more than one component exceeded its
  /// boundary (resolved to a single mark).
  std::size_t grid_ties = 0;
};

inline void check_stop(const StopCondition& stop) {
  if (stop.max_spikes == 0) {
    throw StopTooSmall("max_spikes = 0 admits no complete window");
  }
  if (!(stop.horizon > 0.0)) {
    throw StopTooSmall("horizon " + fmt17(stop.horizon) +
                       " admits no complete window");
  }
}

/// Seed of window m (zero-based) of a train with root `train_seed`.
inline std::uint64_t window_seed(std::uint64_t train_seed, std::size_t m) {
  return derive_seed(train_seed, {static_cast<std::uint64_t>(m)});
}

/// Start of a window: state plus remaining absolute-refractory time per
/// component (0 = active).
struct WindowStart {
  Vector state;
  Vector refractory_left;
};

struct WindowOutcome {
  bool crossed = false;
  double tau = 0.0;
  Marks marks;
  Vector pre_state;
  Vector post_state;
  bool grid_tie = false;
};

namespace detail {

inline void apply_reset(const NetworkSpec& spec, WindowOutcome& out) {
  out.post_state = out.pre_state;
  for (int j : out.marks) out.post_state[j] = spec.reset[j];
}

/// Tracks absolute release times so that the refractory time left at a
/// window start is computed the same way here and in window_start().
class RefractoryClock {
 public:
  explicit RefractoryClock(int k)
      : release_(Vector::Constant(k, -std::numeric_limits<double>::infinity())) {}

  void fire(const NetworkSpec& spec, const Marks& marks, double now) {
    for (int j : marks) release_[j] = now + spec.refractory[j];
  }

  Vector left(double now) const {
    return (release_.array() - now).max(0.0).matrix();
  }

 private:
  Vector release_;
};

}  // namespace detail

/// Simulates one Stein window from `start` until the first strict exceedance
/// of any boundary, or returns crossed = false when nothing crosses before
/// `time_limit`.
///
/// Between input events every active component decays toward 0, so a
/// positive boundary can only be exceeded at an event; a component below a
/// negative boundary reaches it deterministically at
/// t_e + theta ln(X_j / B_j), which is handled in closed form. Components in
/// their refractory period are held at their reset value and ignore input.
inline WindowOutcome simulate_stein_window(const NetworkSpec& spec,
                                           StreamTable& table, double theta,
                                           const WindowStart& start,
                                           double time_limit, Rng& rng,
                                           std::size_t& event_budget) {
  const int k = spec.k;
  Vector x = start.state;
  std::vector<double> release(static_cast<std::size_t>(k), 0.0);
  std::vector<bool> active(static_cast<std::size_t>(k), true);
  for (int j = 0; j < k; ++j) {
    if (start.refractory_left[j] > 0.0) {
      active[static_cast<std::size_t>(j)] = false;
      release[static_cast<std::size_t>(j)] = start.refractory_left[j];
      x[j] = spec.reset[j];
    }
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();

  auto deterministic_crossing = [&](double now) {
    double best = kInf;
    for (int j = 0; j < k; ++j) {
      const double b = spec.boundary[j];
      if (!active[static_cast<std::size_t>(j)] || !(b < 0.0) || !(x[j] < b)) {
        continue;
      }
      best = std::min(best, now + theta * std::log(x[j] / b));
    }
    return best;
  };

  WindowOutcome out;
  double t = 0.0;
  double t_event = table.draw_wait(rng);
  double t_det = deterministic_crossing(0.0);
  for (;;) {
    double t_rel = kInf;
    for (int j = 0; j < k; ++j) {
      if (!active[static_cast<std::size_t>(j)]) {
        t_rel = std::min(t_rel, release[static_cast<std::size_t>(j)]);
      }
    }
    const double t_next = std::min({t_event, t_det, t_rel});
    if (std::isinf(t_next) || t_next > time_limit) return out;

    const double decay = std::exp(-(t_next - t) / theta);
    for (int j = 0; j < k; ++j) {
      if (active[static_cast<std::size_t>(j)]) x[j] *= decay;
    }
    t = t_next;

    if (t_det <= t_event && t_det <= t_rel) {
      for (int j = 0; j < k; ++j) {
        const double b = spec.boundary[j];
        // Components whose closed-form touch time is this instant.
        if (active[static_cast<std::size_t>(j)] && b < 0.0 &&
            x[j] >= b * (1.0 + 1e-12)) {
          x[j] = b;
          out.marks.push_back(j);
        }
      }
      if (out.marks.empty()) {
        // Rounding moved the touch by an ulp; pick the nearest component.
        int arg = -1;
        double gap = kInf;
        for (int j = 0; j < k; ++j) {
          const double b = spec.boundary[j];
          if (active[static_cast<std::size_t>(j)] && b < 0.0 &&
              std::abs(x[j] - b) < gap) {
            gap = std::abs(x[j] - b);
            arg = j;
          }
        }
        x[arg] = spec.boundary[arg];
        out.marks.push_back(arg);
      }
      break;
    }
    if (t_rel < t_event) {
      for (int j = 0; j < k; ++j) {
        if (!active[static_cast<std::size_t>(j)] &&
            release[static_cast<std::size_t>(j)] <= t) {
          active[static_cast<std::size_t>(j)] = true;
        }
      }
      t_det = deterministic_crossing(t);
      continue;
    }

    if (event_budget == 0) {
      throw EventBudgetExceeded("event budget exhausted inside a window");
    }
    --event_budget;
    const auto& s = table.draw_source(rng);
    bool any = false;
    table.for_each_target(s, [&](int j) {
      if (!active[static_cast<std::size_t>(j)]) return;
      x[j] += s.amplitude;
      if (x[j] > spec.boundary[j]) any = true;
    });
    if (any) {
      for (int j = 0; j < k; ++j) {
        if (active[static_cast<std::size_t>(j)] && x[j] > spec.boundary[j]) {
          out.marks.push_back(j);
        }
      }
      break;
    }
    t_event = t + table.draw_wait(rng);
    t_det = deterministic_crossing(t);
  }

  out.crossed = true;
  out.tau = t;
  out.pre_state = x;
  detail::apply_reset(spec, out);
  return out;
}

inline constexpr std::size_t kDefaultTrainEventBudget = 100'000'000;

/// Marked point process of boundary crossings of the Stein process with
/// component-wise reset. Window m draws from window_seed(seed, m).
inline MarkedTrain run_stein_with_reset(
    const NetworkSpec& spec, const SteinParams& p, const StopCondition& stop,
    std::uint64_t seed,
    std::size_t event_budget = kDefaultTrainEventBudget) {
  validate(spec);
  check_stop(stop);
  if (p.k() != spec.k) throw SpecError("SteinParams dimension != spec.k");
  for (int j = 0; j < spec.k; ++j) {
    if (!(p.x0[j] < spec.boundary[j])) {
      throw SpecError("component " + std::to_string(j + 1) +
                      ": start state must be below its boundary");
    }
  }
  StreamTable table(p);
  MarkedTrain train;
  train.spec_hash = spec_hash(spec);
  train.generator = GeneratorTag::stein(p.n);
  train.seed = seed;
  train.stop = stop;

  WindowStart start{p.x0, Vector::Zero(spec.k)};
  detail::RefractoryClock clock(spec.k);
  double elapsed = 0.0;
  for (std::size_t m = 0; train.records.size() < stop.max_spikes; ++m) {
    Rng rng = make_rng(window_seed(seed, m));
    const auto w = simulate_stein_window(spec, table, spec.theta, start,
                                         stop.horizon - elapsed, rng,
                                         event_budget);
    if (!w.crossed) break;
    elapsed += w.tau;
    train.records.push_back(
        {w.tau, elapsed, w.marks, w.pre_state, w.post_state});
    clock.fire(spec, w.marks, elapsed);
    start = {w.post_state, clock.left(elapsed)};
  }
  return train;
}

/// Per-step upcrossing probability of a Brownian bridge between two grid
/// values y, y_next below the boundary, given the step variance:
///   exp(-2 (B - y) (B - y_next) / step_variance).
inline double bridge_crossing_probability(double boundary, double y,
                                          double y_next,
                                          double step_variance) {
  if (y >= boundary || y_next >= boundary) return 1.0;
  if (!(step_variance > 0.0)) return 0.0;
  return std::exp(-2.0 * (boundary - y) * (boundary - y_next) / step_variance);
}

inline constexpr std::size_t kDefaultStepBudget = 2'000'000'000;

/// One OU window on the grid h, 2h, ... from `start`.
///
/// A crossing is registered at the first grid point where some active
/// component is >= its boundary; several exceedances at one grid point are
/// resolved to the largest overshoot, then the lowest index. With `bridge`,
/// a step whose endpoints both lie below B_j still crosses with the
/// Brownian-bridge probability for component j; such a crossing is dated at
/// the step midpoint with pre_state_j = B_j and the other components at their
/// end-of-step values. The per-component bridge ignores noise correlation
/// across components within a step.
inline WindowOutcome simulate_ou_window(const NetworkSpec& spec,
                                        const LimitParams& lp,
                                        OuStepKernel& kernel, bool bridge,
                                        const WindowStart& start,
                                        double time_limit, Rng& rng,
                                        std::size_t& step_budget) {
  const int k = spec.k;
  const double h = kernel.h();
  Vector y = start.state;
  Vector prev(k);
  std::vector<bool> active(static_cast<std::size_t>(k), true);
  for (int j = 0; j < k; ++j) {
    if (start.refractory_left[j] > 0.0) {
      active[static_cast<std::size_t>(j)] = false;
      y[j] = spec.reset[j];
    }
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  WindowOutcome out;

  // A noiseless window whose active components all sit below boundaries
  // above their fluid limits never crosses.
  bool noiseless = lp.psi.cwiseAbs().maxCoeff() == 0.0;
  auto never_crosses = [&] {
    if (!noiseless) return false;
    for (int j = 0; j < k; ++j) {
      if (!(lp.gamma[j] * spec.theta < spec.boundary[j])) return false;
    }
    return true;
  };
  if (std::isinf(time_limit) && never_crosses()) return out;

  for (std::size_t i = 1;; ++i) {
    const double t = static_cast<double>(i) * h;
    if (t > time_limit) return out;
    if (step_budget == 0) {
      throw EventBudgetExceeded("step budget exhausted inside an OU window");
    }
    --step_budget;
    prev = y;
    kernel.advance(y, rng);
    std::vector<bool> was_active = active;
    for (int j = 0; j < k; ++j) {
      if (!active[static_cast<std::size_t>(j)]) {
        y[j] = spec.reset[j];
        if (start.refractory_left[j] <= t) active[static_cast<std::size_t>(j)] = true;
      }
    }

    int best = -1;
    int exceed_count = 0;
    for (int j = 0; j < k; ++j) {
      if (!was_active[static_cast<std::size_t>(j)] || y[j] < spec.boundary[j]) {
        continue;
      }
      ++exceed_count;
      if (best < 0 || y[j] - spec.boundary[j] > y[best] - spec.boundary[best]) {
        best = j;
      }
    }
    if (best >= 0) {
      out.crossed = true;
      out.tau = t;
      out.marks = {best};
      out.pre_state = y;
      out.grid_tie = exceed_count > 1;
      break;
    }
    if (bridge) {
      int fired = -1;
      double fired_p = -1.0;
      for (int j = 0; j < k; ++j) {
        if (!was_active[static_cast<std::size_t>(j)] ||
            std::isinf(spec.boundary[j])) {
          continue;
        }
        const double pj = bridge_crossing_probability(
            spec.boundary[j], prev[j], y[j],
            lp.psi(j, j) * kernel.variance_scale());
        if (unif(rng) < pj && pj > fired_p) {
          fired = j;
          fired_p = pj;
        }
      }
      if (fired >= 0) {
        out.crossed = true;
        out.tau = t - 0.5 * h;
        out.marks = {fired};
        out.pre_state = y;
        out.pre_state[fired] = spec.boundary[fired];
        break;
      }
    }
  }
  detail::apply_reset(spec, out);
  return out;
}

/// Marked point process of the limit OU process with reset, on a grid of
/// step h (exact transition between grid points).
inline MarkedTrain run_ou_with_reset(const NetworkSpec& spec,
                                     const LimitParams& lp,
                                     const StopCondition& stop, double h,
                                     std::uint64_t seed, bool bridge,
                                     std::size_t step_budget = kDefaultStepBudget) {
  validate(spec);
  check_stop(stop);
  if (bridge) {
    for (int j = 0; j < spec.k; ++j) {
      if (std::isfinite(spec.boundary[j]) && !(lp.psi(j, j) > 0.0)) {
        throw NonPositiveDiagonal(
            "component " + std::to_string(j + 1) +
            " has zero noise variance; the bridge correction needs psi_jj > 0");
      }
    }
  }
  OuStepKernel kernel(lp, spec.theta, h);
  MarkedTrain train;
  train.spec_hash = spec_hash(spec);
  train.generator = GeneratorTag::ou(h, bridge);
  train.seed = seed;
  train.stop = stop;

  WindowStart start{spec.y0, Vector::Zero(spec.k)};
  detail::RefractoryClock clock(spec.k);
  double elapsed = 0.0;
  for (std::size_t m = 0; train.records.size() < stop.max_spikes; ++m) {
    Rng rng = make_rng(window_seed(seed, m));
    const auto w = simulate_ou_window(spec, lp, kernel, bridge, start,
                                      stop.horizon - elapsed, rng, step_budget);
    if (!w.crossed) break;
    elapsed += w.tau;
    if (w.grid_tie) ++train.grid_ties;
    train.records.push_back(
        {w.tau, elapsed, w.marks, w.pre_state, w.post_state});
    clock.fire(spec, w.marks, elapsed);
    start = {w.post_state, clock.left(elapsed)};
  }
  return train;
}

/// Window-start state of window m (m >= 1) recovered from the records.
inline WindowStart window_start(const NetworkSpec& spec,
                                const MarkedTrain& train, std::size_t m) {
  if (m == 0 || m > train.records.size()) {
    throw OutOfRange("window index outside the recorded range");
  }
  detail::RefractoryClock clock(spec.k);
  for (std::size_t i = 0; i < m; ++i) {
    clock.fire(spec, train.records[i].marks, train.records[i].cumulative_time);
  }
  const auto& rec = train.records[m - 1];
  return {rec.post_state, clock.left(rec.cumulative_time)};
}

/// (cumulative_time, marks) of one crossing in the superposed process.
struct CrossingEvent {
  double time = 0.0;
  Marks marks;
  friend bool operator==(const CrossingEvent&, const CrossingEvent&) = default;
};

inline std::vector<CrossingEvent> superpose(const MarkedTrain& train) {
  std::vector<CrossingEvent> out;
  out.reserve(train.records.size());
  for (const auto& r : train.records) out.push_back({r.cumulative_time, r.marks});
  return out;
}

/// Per-component crossing times.
inline std::vector<std::vector<double>> split_by_component(
    const std::vector<CrossingEvent>& events, int k) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(k));
  for (const auto& e : events) {
    for (int j : e.marks) out.at(static_cast<std::size_t>(j)).push_back(e.time);
  }
  return out;
}

/// Merges per-component crossing times back into one time-ordered sequence;
/// components crossing at the same instant share one event.
inline std::vector<CrossingEvent> superpose_components(
    const std::vector<std::vector<double>>& per_component) {
  std::map<double, Marks> merged;
  for (std::size_t j = 0; j < per_component.size(); ++j) {
    for (double t : per_component[j]) merged[t].push_back(static_cast<int>(j));
  }
  std::vector<CrossingEvent> out;
  out.reserve(merged.size());
  for (auto& [t, marks] : merged) {
    std::sort(marks.begin(), marks.end());
    out.push_back({t, std::move(marks)});
  }
  return out;
}

/// Intervals between consecutive crossings of component j.
inline std::vector<double> interspike_intervals(const MarkedTrain& train,
                                                int j) {
  std::vector<double> out;
  double last = 0.0;
  bool first = true;
  for (const auto& r : train.records) {
    if (!std::binary_search(r.marks.begin(), r.marks.end(), j)) continue;
    if (!first) out.push_back(r.cumulative_time - last);
    first = false;
    last = r.cumulative_time;
  }
  return out;
}

}  // namespace steinfpt
