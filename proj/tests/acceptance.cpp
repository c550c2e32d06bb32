// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion; exit code
// is non-zero if any fails. Pass criterion numbers as arguments to run a
// subset.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>

#include "support.hpp"

using namespace steinfpt;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " > " : "") + num(v[i]);
  return s;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Random spec whose default-scheme rates are non-negative at every n >= 1.
NetworkSpec nonnegative_spec(std::mt19937_64& rng) {
  auto s = random_spec(rng);
  s.mu = s.mu.cwiseAbs();
  for (auto& c : s.clusters) c.mu = std::abs(c.mu);
  return s;
}

// 1: mu_{j;n} = mu_j, sigma2_{j;n} - sigma2_j = mu_j / n.
Outcome scheme_identities() {
  std::mt19937_64 rng(101);
  double drift_err = 0.0, var_err = 0.0;
  for (int r = 0; r < 200; ++r) {
    const auto s = nonnegative_spec(rng);
    for (int n : {1, 10, 1000, 1000000}) {
      const auto m = stein_moments(scale_params(s, n));
      for (int j = 0; j < s.k; ++j) {
        drift_err = std::max(drift_err, std::abs(m.mu[j] - s.mu[j]));
        var_err = std::max(var_err, std::abs(m.sigma2[j] - s.sigma2[j] - s.mu[j] / n));
      }
      for (std::size_t c = 0; c < s.clusters.size(); ++c) {
        const auto& cl = s.clusters[c];
        const auto i = static_cast<Eigen::Index>(c);
        drift_err = std::max(drift_err, std::abs(m.cluster_mu[i] - cl.mu));
        var_err = std::max(var_err, std::abs(m.cluster_sigma2[i] - cl.sigma2 - cl.mu / n));
      }
    }
  }
  return {drift_err <= 1e-12 && var_err <= 1e-12,
          "200 specs x n in {1,10,1e3,1e6}: max drift error " + num(drift_err) +
              ", max variance error " + num(var_err)};
}

// 2: worked examples exactly, Psi symmetric PSD on 1e3 random specs.
Outcome limit_construction() {
  bool ok = true;
  {
    auto s = make_spec({2.0}, {0.0});
    ok = ok && limit_drift(s)[0] == 2.0;
  }
  {
    auto s = make_spec({0.5, 0.5}, {0.0, 0.0});
    add_cluster(s, {0, 1}, 1.0, 0.0);
    ok = ok && limit_drift(s) == vec({1.5, 1.5});
  }
  {
    auto s = make_spec({0, 0}, {1, 2});
    add_cluster(s, {0, 1}, 0.0, 0.5);
    Matrix want(2, 2);
    want << 1.5, 0.5, 0.5, 2.5;
    ok = ok && limit_covariance(s) == want;
  }
  const bool examples = ok;
  std::mt19937_64 rng(202);
  double min_eig = INFINITY;
  bool symmetric = true;
  for (int r = 0; r < 1000; ++r) {
    const auto s = random_spec(rng);
    const Matrix psi = limit_covariance(s);
    symmetric = symmetric && psi == psi.transpose();
    const Eigen::SelfAdjointEigenSolver<Matrix> es(psi);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff() / (1.0 + psi.norm()));
  }
  ok = ok && symmetric && min_eig >= -1e-12;
  return {ok, std::string("worked examples ") + (examples ? "exact" : "MISMATCH") +
                  ", 1000 random Psi " + (symmetric ? "symmetric" : "ASYMMETRIC") +
                  ", min scaled eigenvalue " + num(min_eig)};
}

NetworkSpec lemma_spec() {
  auto s = make_spec({0.6, 0.9}, {1.0, 0.5});
  add_cluster(s, {0, 1}, 0.4, 0.5);
  return s;
}

// 3: Cov[Z_n(1)] vs Psi and the c~ oracle within 4 jackknife SE.
Outcome lemma_covariance() {
  const auto s = lemma_spec();
  const auto p = scale_params(s, 1000);
  std::vector<Vector> z(10000);
  for (std::size_t r = 0; r < z.size(); ++r) {
    Rng rng(derive_seed(2024, {stream::kMartingale, 3, r}));
    z[r] = sample_martingale_part(p, 1.0, rng);
  }
  const auto est = covariance_rate(z, 1.0);
  const Matrix psi = limit_covariance(s);
  const Matrix ctilde = second_moment_matrix(p);
  const double zpsi = ((est.cov - psi).array() / est.se.array()).abs().maxCoeff();
  const double zc = ((est.cov - ctilde).array() / est.se.array()).abs().maxCoeff();
  // c~ - Psi is Psi with every variance replaced by its drift, over n
  auto drifts = s;
  drifts.sigma2 = s.mu;
  for (auto& c : drifts.clusters) c.sigma2 = c.mu;
  const Matrix want = limit_covariance(drifts) / 1000.0;
  const double oracle = (ctilde - psi - want).cwiseAbs().maxCoeff();
  return {zpsi <= 4 && zc <= 4 && oracle <= 1e-12,
          "max |cov-Psi|/SE " + num(zpsi) + ", max |cov-c~|/SE " + num(zc) +
              ", |c~-Psi-M/n| " + num(oracle)};
}

// 4: empirical characteristic function of Z_n(1).
Outcome characteristic_function() {
  auto s = make_spec({8.0, 6.0}, {1.0, 0.5});
  add_cluster(s, {0, 1}, 2.0, 0.5);
  const Matrix psi = limit_covariance(s);
  std::vector<Vector> grid;
  for (int i = -10; i <= 10; ++i) grid.push_back(vec({0.6, 0.8}) * (0.2 * i));
  const std::size_t reps = 100000;
  std::map<int, EcfCheck> out;
  for (int n : {10, 100, 1000}) {
    const auto p = scale_params(s, n);
    std::vector<Vector> z(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      Rng rng(derive_seed(2024, {stream::kMartingale, 4, static_cast<std::uint64_t>(n), r}));
      z[r] = sample_martingale_part(p, 1.0, rng);
    }
    out[n] = ecf_check(z, p, 1.0, grid, psi);
  }
  const double bound = 4.0 / std::sqrt(static_cast<double>(reps));
  const std::vector<double> gauss{out[10].max_deviation_gaussian,
                                  out[100].max_deviation_gaussian,
                                  out[1000].max_deviation_gaussian};
  const bool ok = out[100].max_deviation <= bound && strictly_decreasing(gauss);
  return {ok, "n=100 deviation from exp(t rho_n) " + num(out[100].max_deviation) +
                  " (bound " + num(bound) + "); Gaussian deviation n=10,100,1000: " +
                  join(gauss)};
}

// 5: componentwise KS of X_n(1) against the exact OU Gaussian.
Outcome marginal_convergence() {
  auto s = make_spec({2.0, 1.5}, {0.05, 0.03});
  add_cluster(s, {0, 1}, 0.5, 0.02);
  const auto lp = limit_params(s);
  const auto law = ou_step_law(lp, s.theta, s.y0, 1.0);
  const std::size_t reps = 10000;
  std::map<int, std::vector<double>> ks;
  for (int n : {10, 100, 1000}) {
    const auto p = scale_params(s, n);
    std::vector<std::vector<double>> x(2, std::vector<double>(reps));
    for (std::size_t r = 0; r < reps; ++r) {
      Rng rng(derive_seed(2024, {stream::kStein, 5, static_cast<std::uint64_t>(n), r}));
      const Vector v = sample_stein_state(p, s.theta, 1.0, rng);
      x[0][r] = v[0];
      x[1][r] = v[1];
    }
    for (int j = 0; j < 2; ++j) {
      const double mean = law.mean[j], sd = std::sqrt(law.cov(j, j));
      ks[n].push_back(ks_distance_to_cdf(
          x[static_cast<std::size_t>(j)], [&](double v) { return normal_cdf(v, mean, sd); }));
    }
  }
  // two independent exact OU batches
  OuStepKernel kernel(lp, s.theta, 1.0);
  std::vector<std::vector<double>> a(2), b(2);
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto* batch : {&a, &b}) {
      const std::uint64_t fam = batch == &a ? stream::kOuReference : stream::kOuSelf;
      Rng rng(derive_seed(2024, {fam, 5, r}));
      Vector y = s.y0;
      kernel.advance(y, rng);
      (*batch)[0].push_back(y[0]);
      (*batch)[1].push_back(y[1]);
    }
  }
  bool ok = true;
  std::string detail;
  for (int j = 0; j < 2; ++j) {
    const auto u = static_cast<std::size_t>(j);
    const double self = ks_distance(a[u], b[u]);
    const std::vector<double> v{ks[10][u], ks[100][u], ks[1000][u]};
    ok = ok && strictly_decreasing(v) && v.back() <= 2 * self;
    detail += (j ? "; " : "") + std::string("component ") + std::to_string(j + 1) +
              " KS " + join(v) + ", self " + num(self);
  }
  return {ok, detail};
}

// 6: all sigma2 = 0, sup-grid error against the fluid ODE.
Outcome fluid_limit() {
  auto s = make_spec({1.5, 0.5}, {0.0, 0.0});
  add_cluster(s, {0, 1}, 0.5, 0.0);
  s.theta = 2.0;
  s.y0 = vec({0.3, 0.4});
  const Vector gamma = limit_drift(s);
  std::vector<double> grid;
  for (int i = 0; i <= 500; ++i) grid.push_back(0.01 * i);
  std::vector<double> med;
  for (int n : {100, 1000, 10000}) {
    auto p = scale_params(s, n);
    p.x0 = s.y0;
    std::vector<double> err;
    for (std::uint64_t r = 0; r < 100; ++r) {
      Rng rng(derive_seed(2024, {stream::kStein, 6, static_cast<std::uint64_t>(n), r}));
      const auto path = simulate_stein(p, s.theta, 5.0, rng);
      const auto xs = evaluate_grid(path, grid);
      double e = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        e = std::max(e, (xs[i] - fluid_solution(gamma, s.theta, s.y0, grid[i]))
                            .cwiseAbs()
                            .maxCoeff());
      }
      err.push_back(e);
    }
    med.push_back(median(err));
  }
  return {strictly_decreasing(med), "median sup error n=1e2,1e3,1e4: " + join(med)};
}

// 7: marked-train convergence on the bundled pair. The trend is judged on
// medians over 10 independent report runs.
Outcome train_convergence() {
  const auto spec = load_network_spec(std::string(STEINFPT_CONFIG_DIR) +
                                      "/convergence_pair.yaml");
  const int runs = 10;
  const std::vector<int> ns{10, 50, 250};
  const std::size_t depth = 3;
  // [run][row][window]
  std::vector<ConvergenceReport> reps;
  for (int r = 0; r < runs; ++r) {
    ConvergenceOptions o;
    o.n_list = ns;
    o.reps = 2000;
    o.depth = depth;
    o.reference_h = 1e-3;
    o.reference_bridge = true;
    o.horizon = 100.0 * spec.theta;
    o.seed = derive_seed(2024, {static_cast<std::uint64_t>(r)});
    reps.push_back(fpt_convergence_report(spec, o));
  }
  auto med = [&](auto get) {
    std::vector<double> v;
    for (const auto& rep : reps) v.push_back(get(rep));
    return median(v);
  };
  bool ok = true;
  bool single_ok = true;
  std::string detail;
  double worst_ns = 0.0;
  for (std::size_t w = 0; w < depth; ++w) {
    for (const char* metric : {"ks", "tv"}) {
      const bool ks = metric[0] == 'k';
      auto pick = [&](const WindowMetrics& m) { return ks ? m.ks_tau : m.tv_marks; };
      std::vector<double> trend;
      for (std::size_t i = 0; i < ns.size(); ++i) {
        trend.push_back(med([&](const auto& rep) { return pick(rep.rows[i].windows[w]); }));
      }
      const double floor = med([&](const auto& rep) { return pick(rep.self_distance[w]); });
      const bool good = strictly_decreasing(trend) && trend.back() <= 2 * floor;
      ok = ok && good;
      detail += "\n    window " + std::to_string(w + 1) + (ks ? " KS(tau) " : " TV(mark) ") +
                join(trend) + ", floor " + num(floor) + (good ? "" : "  <- fails");
      // single run, for reference
      const auto& one = reps.front();
      std::vector<double> first;
      for (std::size_t i = 0; i < ns.size(); ++i) first.push_back(pick(one.rows[i].windows[w]));
      single_ok = single_ok && strictly_decreasing(first) &&
                  first.back() <= 2 * pick(one.self_distance[w]);
    }
    for (const auto& rep : reps) {
      worst_ns = std::max(worst_ns, rep.rows.back().windows[w].non_singleton);
    }
  }
  ok = ok && worst_ns < 1e-2;
  detail += "\n    max non-singleton mark frequency at n=250 over runs: " + num(worst_ns);
  detail += std::string("\n    (first run alone would ") + (single_ok ? "pass" : "fail") + ")";
  return {ok, "medians over " + std::to_string(runs) + " runs of 2000 trains, depth 3" + detail};
}

// 8: reset invariants on random trains.
Outcome reset_invariants() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t records = 0, violations = 0, isi_checked = 0;
  std::size_t ou_records = 0, ou_violations = 0, ou_ties = 0;
  auto check = [&](const NetworkSpec& s, const MarkedTrain& tr, bool exact,
                   std::size_t& count, std::size_t& bad) {
    double last = 0.0;
    for (const auto& r : tr.records) {
      ++count;
      bool good = r.cumulative_time > last && !r.marks.empty();
      last = r.cumulative_time;
      std::set<int> marked(r.marks.begin(), r.marks.end());
      for (int j = 0; j < s.k; ++j) {
        const bool above = r.pre_state[j] >= s.boundary[j];
        if (marked.contains(j)) {
          good = good && above && r.post_state[j] == s.reset[j];
        } else if (exact) {
          good = good && !above;
        }
      }
      bad += !good;
    }
    for (int j = 0; j < s.k; ++j) {
      if (s.refractory[j] <= 0.0) continue;
      for (double d : interspike_intervals(tr, j)) {
        ++isi_checked;
        bad += d < s.refractory[j];
      }
    }
  };
  for (int t = 0; t < 1000; ++t) {
    auto s = random_spec(rng);
    for (int j = 0; j < s.k; ++j) {
      if (s.sigma2[j] == 0.0) s.mu[j] = std::abs(s.mu[j]);
      s.mu[j] += 1.0;  // keep trains busy
      s.reset[j] = -0.5 * u(rng);
      s.y0[j] = s.reset[j];
      s.refractory[j] = u(rng) < 0.5 ? 0.0 : 0.3 * u(rng);
    }
    for (auto& c : s.clusters) {
      if (c.sigma2 == 0.0) c.mu = std::abs(c.mu);
    }
    int n = 50;
    for (int j = 0; j < s.k; ++j) {
      if (s.mu[j] < 0) n = std::max(n, static_cast<int>(std::ceil(-2 * s.mu[j] / s.sigma2[j])));
    }
    for (const auto& c : s.clusters) {
      if (c.mu < 0) n = std::max(n, static_cast<int>(std::ceil(-2 * c.mu / c.sigma2)));
    }
    const StopCondition stop{30, 50.0};
    const auto seed = derive_seed(2024, {8, static_cast<std::uint64_t>(t)});
    check(s, run_stein_with_reset(s, scale_params(s, n), stop, seed), true, records, violations);
    if (t % 10 == 0) {
      const auto lp = limit_params(s);
      const bool bridge = (lp.psi.diagonal().array() > 0.0).all();
      const auto tr = run_ou_with_reset(s, lp, stop, 1e-3, seed, bridge);
      ou_ties += tr.grid_ties;
      check(s, tr, false, ou_records, ou_violations);
    }
  }
  return {violations == 0 && ou_violations == 0 && records > 0 && isi_checked > 0,
          "1000 Stein trains: " + std::to_string(records) + " records, " +
              std::to_string(violations) + " violations, " + std::to_string(isi_checked) +
              " refractory ISIs checked; 100 OU trains: " + std::to_string(ou_records) +
              " records, " + std::to_string(ou_violations) + " violations, " +
              std::to_string(ou_ties) + " grid ties"};
}

// 9: every CLI command twice, byte-identical outputs.
Outcome cli_determinism() {
  const std::string cli = STEINFPT_CLI_PATH;
  const std::string cfg = STEINFPT_CONFIG_DIR;
  const fs::path root = fs::temp_directory_path() / "steinfpt_acceptance";
  const std::vector<std::string> commands{
      "validate --config " + cfg + "/neuron_pair.yaml",
      "simulate --config " + cfg + "/neuron_pair.yaml --n 100 --horizon 5 --seed 9",
      "simulate --config " + cfg + "/neuron_triple_refractory.yaml --h 0.01 --horizon 5 "
      "--format ndjson --seed 9",
      "spikes --config " + cfg + "/neuron_pair.yaml --n 50 --max-spikes 200 --seed 9",
      "spikes --config " + cfg + "/neuron_triple_refractory.yaml --h 0.001 --bridge "
      "--horizon 20 --format ndjson --seed 9",
      "converge --config " + cfg + "/convergence_pair.yaml --n-list 10,50 --reps 1000 "
      "--depth 2 --ref-h 0.01 --seed 9"};
  auto snapshot = [&](const std::string& cmd) {
    fs::remove_all(root);
    fs::create_directories(root);
    const auto line = "'" + cli + "' " + cmd + " --out '" + (root / "out").string() +
                      "' > '" + (root / "stdout").string() + "' 2>&1";
    const int status = std::system(line.c_str());
    std::map<std::string, std::string> files;
    files["<exit>"] = std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1);
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return files;
  };
  std::size_t compared = 0;
  std::string bad;
  for (const auto& cmd : commands) {
    const auto a = snapshot(cmd);
    const auto b = snapshot(cmd);
    if (a != b || a.at("<exit>") != "0") bad += " [" + cmd.substr(0, cmd.find(' ')) + "]";
    compared += a.size() - 1;
  }
  fs::remove_all(root);
  return {bad.empty(), std::to_string(commands.size()) + " commands, " +
                           std::to_string(compared) + " files compared" +
                           (bad.empty() ? "" : ", differing:" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"scheme identities", scheme_identities}},
      {2, {"limit parameter construction", limit_construction}},
      {3, {"martingale covariance", lemma_covariance}},
      {4, {"characteristic function", characteristic_function}},
      {5, {"marginal convergence", marginal_convergence}},
      {6, {"fluid limit", fluid_limit}},
      {7, {"marked-train convergence", train_convergence}},
      {8, {"reset invariants", reset_invariants}},
      {9, {"CLI determinism", cli_determinism}}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& [id, c] : criteria) {
    if (!wanted.empty() && !wanted.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("criterion %d %s: %s (%.1fs)\n    %s\n", id, o.pass ? "PASS" : "FAIL",
                c.first, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
