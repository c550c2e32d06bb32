#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "steinfpt/fpt_reset.hpp"
#include "steinfpt/model.hpp"
#include "steinfpt/parallel.hpp"
#include "steinfpt/rng.hpp"
#include "steinfpt/stats.hpp"

namespace steinfpt {

struct ConvergenceOptions {
  std::vector<int> n_list;
  double reference_h = 1e-3;
  bool reference_bridge = true;
  std::size_t reps = 1000;
  std::size_t depth = 1;
  double horizon = 100.0;  // per-train time cap
  std::uint64_t seed = 0;
  ScalingScheme scheme = default_scheme();
};

inline constexpr std::size_t kMinConvergenceReps = 1000;

/// Distances between two batches of trains restricted to window i.
struct WindowMetrics {
  std::size_t samples_a = 0;
  std::size_t samples_b = 0;
  double ks_tau = NAN;
  double ks_cumulative = NAN;
  double w1_tau = NAN;
  double tv_marks = NAN;
  double tv_se = NAN;
  double ks_null_mean = NAN;  // E[KS] of two same-law batches of these sizes
  double non_singleton = 0.0;
  bool residual_simultaneity = false;
  std::vector<double> ks_pre_state;  // one per component
};

struct ConvergenceRow {
  int n = 0;
  std::vector<WindowMetrics> windows;
  double mean_spikes = 0.0;
};

struct ConvergenceReport {
  std::vector<int> axis;
  std::string reference;
  std::string spec_hash;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::size_t depth = 0;
  std::vector<ConvergenceRow> rows;
  /// OU batch A vs independent OU batch B: the acceptance floor.
  std::vector<WindowMetrics> self_distance;
  std::vector<std::string> flags;  // NoEvents, ResidualSimultaneity

  bool has_flag(const std::string& f) const {
    for (const auto& x : flags) {
      if (x == f) return true;
    }
    return false;
  }
};

namespace detail {

struct WindowSamples {
  std::vector<double> tau;
  std::vector<double> cumulative;
  std::map<Marks, std::size_t> marks;
  std::vector<std::vector<double>> pre_state;  // [component][sample]
};

inline std::vector<WindowSamples> collect_windows(
    const std::vector<MarkedTrain>& trains, std::size_t depth, int k) {
  std::vector<WindowSamples> w(depth);
  for (auto& s : w) s.pre_state.resize(static_cast<std::size_t>(k));
  for (const auto& tr : trains) {
    for (std::size_t i = 0; i < depth && i < tr.records.size(); ++i) {
      const auto& r = tr.records[i];
      w[i].tau.push_back(r.tau);
      w[i].cumulative.push_back(r.cumulative_time);
      ++w[i].marks[r.marks];
      for (int j = 0; j < k; ++j) {
        w[i].pre_state[static_cast<std::size_t>(j)].push_back(r.pre_state[j]);
      }
    }
  }
  return w;
}

inline double tv_standard_error(const MarkTable& a, std::size_t na,
                                const MarkTable& b, std::size_t nb) {
  std::map<Marks, std::pair<double, double>> all;
  for (const auto& [m, p] : a) all[m].first = p;
  for (const auto& [m, p] : b) all[m].second = p;
  double s = 0.0;
  for (const auto& [m, pq] : all) {
    const auto [p, q] = pq;
    s += std::sqrt(p * (1 - p) / static_cast<double>(na) +
                   q * (1 - q) / static_cast<double>(nb));
  }
  return 0.5 * s;
}

inline WindowMetrics compare_window(const WindowSamples& a,
                                    const WindowSamples& b) {
  WindowMetrics m;
  m.samples_a = a.tau.size();
  m.samples_b = b.tau.size();
  m.ks_pre_state.assign(a.pre_state.size(), NAN);
  if (a.tau.empty() || b.tau.empty()) return m;
  m.ks_tau = ks_distance(a.tau, b.tau);
  m.ks_cumulative = ks_distance(a.cumulative, b.cumulative);
  m.w1_tau = wasserstein1(a.tau, b.tau);
  const auto ta = normalize(a.marks);
  const auto tb = normalize(b.marks);
  const auto cmp = compare_marks(ta, tb);
  m.tv_marks = cmp.tv;
  m.non_singleton = cmp.non_singleton_a;
  m.residual_simultaneity = cmp.residual_simultaneity;
  m.tv_se = tv_standard_error(ta, m.samples_a, tb, m.samples_b);
  // Mean of the Kolmogorov distribution, sqrt(pi/2) ln 2.
  m.ks_null_mean = 0.8687311606361592 *
                   std::sqrt(static_cast<double>(m.samples_a + m.samples_b) /
                             static_cast<double>(m.samples_a * m.samples_b));
  for (std::size_t j = 0; j < a.pre_state.size(); ++j) {
    m.ks_pre_state[j] = ks_distance(a.pre_state[j], b.pre_state[j]);
  }
  return m;
}

}  // namespace detail

/// Stein trains for one n: reps replications, train r seeded from
/// derive_seed(seed, {stein stream, row, r}).
inline std::vector<MarkedTrain> stein_batch(const NetworkSpec& spec,
                                            const SteinParams& p,
                                            const StopCondition& stop,
                                            std::size_t reps, std::uint64_t seed,
                                            std::size_t row) {
  std::vector<MarkedTrain> out(reps);
  parallel_for(reps, [&](std::size_t r) {
    out[r] = run_stein_with_reset(
        spec, p, stop, derive_seed(seed, {stream::kStein, row, r}));
  });
  return out;
}

inline std::vector<MarkedTrain> ou_batch(const NetworkSpec& spec,
                                         const LimitParams& lp,
                                         const StopCondition& stop, double h,
                                         bool bridge, std::size_t reps,
                                         std::uint64_t seed,
                                         std::uint64_t family) {
  std::vector<MarkedTrain> out(reps);
  parallel_for(reps, [&](std::size_t r) {
    out[r] = run_ou_with_reset(spec, lp, stop, h,
                               derive_seed(seed, {family, r}), bridge);
  });
  return out;
}

/// Per-window distances between Stein-with-reset trains at each n and the
/// OU-with-reset reference, plus the reference self-distance (two
/// independent OU batches) that serves as the noise floor.
inline ConvergenceReport fpt_convergence_report(const NetworkSpec& spec,
                                                const ConvergenceOptions& opt) {
  validate(spec);
  if (opt.n_list.empty()) throw OutOfRange("n_list must not be empty");
  for (std::size_t i = 1; i < opt.n_list.size(); ++i) {
    if (opt.n_list[i] < opt.n_list[i - 1]) {
      throw OutOfRange("n_list must be non-decreasing");
    }
  }
  if (opt.reps < kMinConvergenceReps) {
    throw InsufficientReplications("convergence report needs reps >= " +
                                   std::to_string(kMinConvergenceReps));
  }
  if (opt.depth < 1) throw OutOfRange("depth must be >= 1");

  const auto lp = limit_params(spec);
  const StopCondition stop{opt.depth, opt.horizon};

  ConvergenceReport rep;
  rep.axis = opt.n_list;
  rep.reference = "ou(h=" + fmt17(opt.reference_h) +
                  (opt.reference_bridge ? ",bridge)" : ")");
  rep.spec_hash = spec_hash(spec);
  rep.seed = opt.seed;
  rep.reps = opt.reps;
  rep.depth = opt.depth;

  const auto ou_a = ou_batch(spec, lp, stop, opt.reference_h,
                             opt.reference_bridge, opt.reps, opt.seed,
                             stream::kOuReference);
  const auto ou_b = ou_batch(spec, lp, stop, opt.reference_h,
                             opt.reference_bridge, opt.reps, opt.seed,
                             stream::kOuSelf);
  const auto wa = detail::collect_windows(ou_a, opt.depth, spec.k);
  const auto wb = detail::collect_windows(ou_b, opt.depth, spec.k);
  for (std::size_t i = 0; i < opt.depth; ++i) {
    rep.self_distance.push_back(detail::compare_window(wa[i], wb[i]));
  }

  bool any_events = !wa.front().tau.empty();
  bool residual = false;
  for (std::size_t row = 0; row < opt.n_list.size(); ++row) {
    const int n = opt.n_list[row];
    const SteinParams p = opt.scheme(spec, n);
    const auto trains = stein_batch(spec, p, stop, opt.reps, opt.seed, row);
    const auto ws = detail::collect_windows(trains, opt.depth, spec.k);
    ConvergenceRow r;
    r.n = n;
    std::size_t spikes = 0;
    for (const auto& t : trains) spikes += t.records.size();
    r.mean_spikes = static_cast<double>(spikes) / static_cast<double>(opt.reps);
    any_events = any_events || !ws.front().tau.empty();
    for (std::size_t i = 0; i < opt.depth; ++i) {
      r.windows.push_back(detail::compare_window(ws[i], wa[i]));
      residual = residual || r.windows.back().residual_simultaneity;
    }
    rep.rows.push_back(std::move(r));
  }
  if (!any_events) rep.flags.push_back("NoEvents");
  if (residual) rep.flags.push_back("ResidualSimultaneity");
  return rep;
}

namespace detail {

inline nlohmann::json metrics_json(const WindowMetrics& m) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  nlohmann::json pre = nlohmann::json::array();
  for (double v : m.ks_pre_state) pre.push_back(num(v));
  return {{"samples_stein_or_a", m.samples_a},
          {"samples_reference", m.samples_b},
          {"ks_tau", num(m.ks_tau)},
          {"ks_cumulative_time", num(m.ks_cumulative)},
          {"w1_tau", num(m.w1_tau)},
          {"tv_marks", num(m.tv_marks)},
          {"tv_marks_se", num(m.tv_se)},
          {"ks_null_mean", num(m.ks_null_mean)},
          {"non_singleton_mark_frequency", m.non_singleton},
          {"residual_simultaneity", m.residual_simultaneity},
          {"ks_pre_state", pre}};
}

}  // namespace detail

inline nlohmann::json to_json(const ConvergenceReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& m : row.windows) w.push_back(detail::metrics_json(m));
    rows.push_back({{"n", row.n}, {"mean_spikes", row.mean_spikes}, {"windows", w}});
  }
  nlohmann::json self = nlohmann::json::array();
  for (const auto& m : r.self_distance) self.push_back(detail::metrics_json(m));
  return {{"axis", r.axis},
          {"axis_name", "n"},
          {"metrics", {"ks_tau", "ks_cumulative_time", "w1_tau", "tv_marks",
                       "ks_pre_state"}},
          {"reference", r.reference},
          {"spec_hash", r.spec_hash},
          {"seed", r.seed},
          {"reps", r.reps},
          {"depth", r.depth},
          {"rows", rows},
          {"self_distance", self},
          {"flags", r.flags}};
}

/// Fixed-width table: one line per (n, window) plus the reference floor.
inline std::string format_table(const ConvergenceReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "reference %s  reps %zu  depth %zu  seed %llu\n",
                r.reference.c_str(), r.reps, r.depth,
                static_cast<unsigned long long>(r.seed));
  out += buf;
  std::snprintf(buf, sizeof buf, "%-10s %6s %9s %9s %9s %9s %9s %9s\n", "n",
                "window", "KS(tau)", "KS(cum)", "W1(tau)", "TV(mark)",
                "nonsingl", "samples");
  out += buf;
  auto line = [&](const std::string& label, std::size_t i,
                  const WindowMetrics& m) {
    std::snprintf(buf, sizeof buf,
                  "%-10s %6zu %9.5f %9.5f %9.5f %9.5f %9.5f %9zu\n",
                  label.c_str(), i + 1, m.ks_tau, m.ks_cumulative, m.w1_tau,
                  m.tv_marks, m.non_singleton, m.samples_a);
    out += buf;
  };
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.windows.size(); ++i) {
      line(std::to_string(row.n), i, row.windows[i]);
    }
  }
  for (std::size_t i = 0; i < r.self_distance.size(); ++i) {
    line("self", i, r.self_distance[i]);
  }
  if (!r.flags.empty()) {
    out += "flags:";
    for (const auto& f : r.flags) out += " " + f;
    out += "\n";
  }
  return out;
}

}  // namespace steinfpt
