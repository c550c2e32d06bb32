// steinfpt: command-line front end.
//
//   steinfpt validate --config net.yaml
//   steinfpt simulate --config net.yaml (--n N | --h H) --horizon T --seed S --out DIR
//                     (--h also writes fluid.csv, the noise-free solution)
//   steinfpt spikes   --config net.yaml (--n N | --h H [--bridge])
//                     [--max-spikes M] [--horizon T] [--refractory D,..] --seed S --out DIR
//   steinfpt converge --config net.yaml --n-list 10,50,250 --reps R --depth L
//                     --ref-h H [--no-bridge] --seed S --out DIR
//
// Exit codes: 0 ok, 2 config/usage error, 3 runtime error. Every command
// with --out writes DIR/manifest.json, also on failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "steinfpt/steinfpt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace steinfpt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::optional<int> n;
  std::vector<int> n_list;
  std::optional<double> h;
  std::optional<double> ref_h;
  bool bridge = false;
  bool ref_bridge = true;
  std::optional<double> horizon;
  std::optional<std::size_t> max_spikes;
  std::size_t depth = 1;
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
  std::vector<double> refractory;
};

/// Run bookkeeping, flushed to manifest.json whatever the outcome.
class Manifest {
 public:
  Manifest(std::string command, const Options& o) : out_dir_(o.out) {
    doc_["tool"] = "steinfpt";
    doc_["version"] = STEINFPT_VERSION;
    doc_["command"] = std::move(command);
    doc_["config"] = {{"path", o.config}, {"hash", nullptr}};
    doc_["outputs"] = json::array();
    doc_["error"] = nullptr;
  }

  json& params() { return doc_["parameters"]; }
  json& operator[](const std::string& key) { return doc_[key]; }

  void config_bytes(const std::string& bytes) {
    doc_["config"]["hash"] = hex64(fnv1a(bytes));
  }

  fs::path output(const std::string& name) {
    doc_["outputs"].push_back(name);
    return fs::path(out_dir_) / name;
  }

  void fail(const std::string& kind, const std::string& what) {
    doc_["error"] = {{"kind", kind}, {"message", what}};
  }

  void write() const {
    if (out_dir_.empty()) return;
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    std::ofstream os(fs::path(out_dir_) / "manifest.json", std::ios::binary);
    os << doc_.dump(2) << '\n';
  }

 private:
  std::string out_dir_;
  json doc_;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json stein_params_json(const SteinParams& p) {
  return {{"n", p.n},
          {"a", static_cast<double>(p.a)},
          {"b", static_cast<double>(p.b)},
          {"alpha", vector_json(p.alpha.cast<double>())},
          {"beta", vector_json(p.beta.cast<double>())},
          {"lambda", vector_json(p.lambda.cast<double>())},
          {"omega", vector_json(p.omega.cast<double>())},
          {"x0", vector_json(p.x0)},
          {"hash", params_hash(p)}};
}

std::string limit_hash(const LimitParams& lp) {
  std::string s;
  for (Eigen::Index i = 0; i < lp.gamma.size(); ++i) s += fmt17(lp.gamma[i]) + ",";
  for (Eigen::Index i = 0; i < lp.psi.size(); ++i) s += fmt17(lp.psi.data()[i]) + ",";
  return hex64(fnv1a(s));
}

void print_matrix(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << "  ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ' ' << fmt17(m(i, j));
    os << '\n';
  }
}

/// Smallest n with non-negative default-scheme rates, or 0 if none exists.
int min_admissible_n(const NetworkSpec& spec) {
  double need = 1.0;
  auto bound = [&](double mu, double s2) {
    if (mu >= 0.0) return true;
    if (s2 <= 0.0) return false;
    need = std::max(need, std::ceil(-2.0 * mu / s2));
    return true;
  };
  for (int j = 0; j < spec.k; ++j) {
    if (!bound(spec.mu[j], spec.sigma2[j])) return 0;
  }
  for (const auto& c : spec.clusters) {
    if (!bound(c.mu, c.sigma2)) return 0;
  }
  return static_cast<int>(need);
}

int cmd_validate(const Options& o, Manifest& man) {
  const auto bytes = read_file(o.config);
  man.config_bytes(bytes);
  const auto spec = parse_network_spec(bytes, o.config);
  const auto lp = limit_params(spec);
  std::cout << "config " << o.config << ": valid (k=" << spec.k
            << ", clusters=" << spec.clusters.size() << ", spec hash "
            << spec_hash(spec) << ")\n";
  std::cout << "Gamma:";
  for (Eigen::Index j = 0; j < lp.gamma.size(); ++j) std::cout << ' ' << fmt17(lp.gamma[j]);
  std::cout << "\nPsi:\n";
  print_matrix(std::cout, lp.psi);

  const int n_min = min_admissible_n(spec);
  if (n_min == 0) {
    std::cout << "scheme: no n gives non-negative rates (negative drift with "
                 "zero variance)\n";
    man.fail("NegativeRate", "no admissible n for the default scheme");
    return kExitConfig;
  }
  std::vector<int> probe;
  for (int n : {10, 100, 1000, 10000}) probe.push_back(std::max(n, n_min * n / 10));
  const auto rep = check_admissible(spec, default_scheme(), probe);
  std::cout << "scheme: rates non-negative for n >= " << n_min << '\n';
  for (const auto& r : rep.rows) {
    std::cout << "  n=" << r.n << "  |amplitude|=" << fmt17(r.max_amplitude)
              << "  drift error=" << fmt17(r.drift_error)
              << "  variance error=" << fmt17(r.variance_error) << '\n';
  }
  man.params() = {{"probe_n", probe}, {"min_admissible_n", n_min}};
  if (!rep.admissible) {
    std::cout << "scheme: not admissible: " << rep.reason << '\n';
    man.fail("NotAdmissible", rep.reason);
    return kExitConfig;
  }
  std::cout << "scheme: admissible at probe n\n";
  return kExitOk;
}

void require_generator(const Options& o) {
  if (o.n.has_value() == o.h.has_value()) {
    throw CLI::ValidationError("generator", "give exactly one of --n or --h");
  }
}

int cmd_simulate(const Options& o, Manifest& man) {
  require_generator(o);
  const auto bytes = read_file(o.config);
  man.config_bytes(bytes);
  const auto spec = parse_network_spec(bytes, o.config);
  const double horizon = o.horizon.value_or(1.0);
  const auto fmt = parse_table_format(o.format);
  man.params() = {{"horizon", horizon}, {"seed", o.seed}, {"format", o.format}};
  fs::create_directories(o.out);
  const std::string file = std::string("path.") + format_extension(fmt);
  if (o.n) {
    const auto p = scale_params(spec, *o.n);
    man.params()["n"] = *o.n;
    man["stein_params"] = stein_params_json(p);
    Rng rng = make_rng(derive_seed(o.seed, {stream::kStein}));
    const auto path = simulate_stein(p, spec.theta, horizon, rng);
    auto os = open_out(man.output(file));
    write_jump_path(os, path, params_hash(p), o.seed, fmt);
  } else {
    const auto lp = limit_params(spec);
    man.params()["h"] = *o.h;
    Rng rng = make_rng(derive_seed(o.seed, {stream::kOu}));
    const auto path = simulate_ou(lp, spec.theta, spec.y0, horizon, *o.h, rng);
    {
      auto os = open_out(man.output(file));
      write_grid_path(os, path, limit_hash(lp), o.seed, OuScheme::kExact, fmt);
    }
    // noise-free solution on the same grid
    auto os = open_out(man.output(std::string("fluid.") + format_extension(fmt)));
    write_grid_path(os, fluid_path(lp.gamma, spec.theta, path), limit_hash(lp),
                    o.seed, OuScheme::kExact, fmt);
  }
  return kExitOk;
}

int cmd_spikes(const Options& o, Manifest& man) {
  require_generator(o);
  const auto bytes = read_file(o.config);
  man.config_bytes(bytes);
  auto spec = parse_network_spec(bytes, o.config);
  if (!o.refractory.empty()) {
    if (o.refractory.size() == 1) {
      spec.refractory.setConstant(o.refractory.front());
    } else if (static_cast<int>(o.refractory.size()) == spec.k) {
      for (int j = 0; j < spec.k; ++j) {
        spec.refractory[j] = o.refractory[static_cast<std::size_t>(j)];
      }
    } else {
      throw SpecError("--refractory needs 1 or k values");
    }
    validate(spec);
  }
  StopCondition stop;
  if (o.max_spikes) stop.max_spikes = *o.max_spikes;
  if (o.horizon) stop.horizon = *o.horizon;
  if (!o.max_spikes && !o.horizon) stop.max_spikes = 100;
  const auto fmt = parse_table_format(o.format);
  man.params() = {{"seed", o.seed},
                  {"format", o.format},
                  {"refractory", vector_json(spec.refractory)},
                  {"max_spikes", stop.bounded_spikes() ? json(stop.max_spikes) : json(nullptr)},
                  {"horizon", std::isfinite(stop.horizon) ? json(stop.horizon) : json(nullptr)}};
  fs::create_directories(o.out);

  MarkedTrain train;
  if (o.n) {
    const auto p = scale_params(spec, *o.n);
    man.params()["n"] = *o.n;
    man["stein_params"] = stein_params_json(p);
    train = run_stein_with_reset(spec, p, stop, derive_seed(o.seed, {stream::kStein}));
  } else {
    man.params()["h"] = *o.h;
    man.params()["bridge"] = o.bridge;
    train = run_ou_with_reset(spec, limit_params(spec), stop, *o.h,
                              derive_seed(o.seed, {stream::kOu}), o.bridge);
  }
  {
    auto os = open_out(man.output(std::string("train.") + format_extension(fmt)));
    write_train_records(os, train, fmt, spec.k);
  }
  {
    auto os = open_out(man.output("train.header.json"));
    os << train_header(train, spec.k, fmt).dump(2) << '\n';
  }
  std::cout << train.records.size() << " records written to " << o.out << '\n';
  return kExitOk;
}

int cmd_converge(const Options& o, Manifest& man) {
  const auto bytes = read_file(o.config);
  man.config_bytes(bytes);
  const auto spec = parse_network_spec(bytes, o.config);
  if (o.n_list.empty()) throw CLI::ValidationError("--n-list", "required");
  ConvergenceOptions opt;
  opt.n_list = o.n_list;
  opt.reps = o.reps;
  opt.depth = o.depth;
  opt.reference_h = o.ref_h.value_or(o.h.value_or(1e-3));
  opt.reference_bridge = o.ref_bridge;
  opt.horizon = o.horizon.value_or(100.0 * spec.theta);
  opt.seed = o.seed;
  man.params() = {{"n_list", o.n_list},
                  {"reps", o.reps},
                  {"depth", o.depth},
                  {"ref_h", opt.reference_h},
                  {"ref_bridge", opt.reference_bridge},
                  {"horizon", opt.horizon},
                  {"seed", o.seed}};
  for (int n : o.n_list) (void)scale_params(spec, n);
  const auto rep = fpt_convergence_report(spec, opt);
  fs::create_directories(o.out);
  const auto table = format_table(rep);
  std::cout << table;
  {
    auto os = open_out(man.output("report.txt"));
    os << table;
  }
  {
    auto os = open_out(man.output("report.json"));
    os << to_json(rep).dump(2) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stein jump networks, their OU limit, and boundary-crossing trains"};
  app.require_subcommand(1);
  app.set_version_flag("--version", STEINFPT_VERSION);
  // --h is the grid step, so help is long-form only
  app.set_help_flag("--help", "print help and exit");
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "network config (YAML)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "root seed");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* validate_cmd = app.add_subcommand("validate", "check a network config");
  validate_cmd->add_option("--config", o.config, "network config (YAML)")
      ->required()
      ->check(CLI::ExistingFile);
  validate_cmd->add_option("--out", o.out, "output directory for the manifest");

  auto* simulate_cmd = app.add_subcommand("simulate", "simulate one path");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--n", o.n, "Stein scaling index")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--h", o.h, "OU grid step")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--horizon", o.horizon, "time horizon")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--format", o.format, "csv or ndjson");
  simulate_cmd->get_option("--out")->required();

  auto* spikes_cmd = app.add_subcommand("spikes", "generate a marked spike train");
  add_common(spikes_cmd);
  spikes_cmd->add_option("--n", o.n, "Stein scaling index")->check(CLI::PositiveNumber);
  spikes_cmd->add_option("--h", o.h, "OU grid step")->check(CLI::PositiveNumber);
  spikes_cmd->add_flag("--bridge", o.bridge, "OU bridge crossing correction");
  spikes_cmd->add_option("--horizon", o.horizon, "stop at this time");
  spikes_cmd->add_option("--max-spikes", o.max_spikes, "stop after this many records");
  spikes_cmd->add_option("--refractory", o.refractory, "refractory delay(s)")
      ->delimiter(',');
  spikes_cmd->add_option("--format", o.format, "csv or ndjson");
  spikes_cmd->get_option("--out")->required();
  o.format = "csv";

  auto* converge_cmd = app.add_subcommand("converge", "marked-train convergence report");
  add_common(converge_cmd);
  converge_cmd->add_option("--n-list", o.n_list, "comma-separated n values")
      ->delimiter(',')
      ->required();
  converge_cmd->add_option("--reps", o.reps, "replications per batch");
  converge_cmd->add_option("--depth", o.depth, "windows per train");
  converge_cmd->add_option("--ref-h,--h", o.ref_h, "OU reference grid step");
  converge_cmd->add_flag("--bridge,!--no-bridge", o.ref_bridge,
                         "bridge correction in the OU reference (default on)");
  converge_cmd->add_option("--horizon", o.horizon, "per-train time cap");
  converge_cmd->get_option("--out")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest man(sub->get_name(), o);
  int rc = kExitOk;
  try {
    if (sub == validate_cmd) rc = cmd_validate(o, man);
    if (sub == simulate_cmd) rc = cmd_simulate(o, man);
    if (sub == spikes_cmd) rc = cmd_spikes(o, man);
    if (sub == converge_cmd) rc = cmd_converge(o, man);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    man.fail("Usage", e.what());
    rc = kExitConfig;
  } catch (const SpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    man.fail("ConfigError", e.what());
    rc = kExitConfig;
  } catch (const NegativeRate& e) {
    std::cerr << "config error: " << e.what() << '\n';
    man.fail("NegativeRate", e.what());
    rc = kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    man.fail("RuntimeError", e.what());
    rc = kExitRuntime;
  }
  man.write();
  return rc;
}
