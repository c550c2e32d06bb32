#pragma once

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "steinfpt/errors.hpp"
#include "steinfpt/network_spec.hpp"

namespace steinfpt {

// Network configs are YAML documents:
//
//   dimension: 2
//   theta: 1.0
//   components:            # exactly `dimension` entries, in order
//     - mu: 0.6            # limit drift input
//       sigma2: 0.3        # limit variance input
//       boundary: 1.0      # firing threshold B_j (.inf allowed)
//       reset: 0.0         # reset value r0_j
//       refractory: 0.0    # optional, default 0
//       y0: 0.0            # optional, default = reset
//   clusters:              # optional
//     - members: [1, 2]    # one-based component indices, >= 2 of them
//       mu: 0.4
//       sigma2: 0.4
//
// Every error carries the line of the offending node.

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const {
    const int line = node.IsDefined() ? node.Mark().line + 1 : 0;
    throw ConfigError(file_, line, what);
  }

  void check_keys(const YAML::Node& map, const std::set<std::string>& allowed,
                  const std::string& where) const {
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.contains(key)) {
        fail(kv.first, "unknown key '" + key + "' in " + where);
      }
    }
  }

  YAML::Node require(const YAML::Node& map, const std::string& key,
                     const std::string& where) const {
    const YAML::Node v = map[key];
    if (!v) fail(map, where + ": missing required key '" + key + "'");
    return v;
  }

  double number(const YAML::Node& v, const std::string& what) const {
    if (!v.IsScalar()) fail(v, what + " must be a number");
    try {
      return v.as<double>();
    } catch (const YAML::Exception&) {
      fail(v, what + " must be a number, got '" + v.Scalar() + "'");
    }
  }

  int integer(const YAML::Node& v, const std::string& what) const {
    if (!v.IsScalar()) fail(v, what + " must be an integer");
    try {
      return v.as<int>();
    } catch (const YAML::Exception&) {
      fail(v, what + " must be an integer, got '" + v.Scalar() + "'");
    }
  }

 private:
  std::string file_;
};

}  // namespace detail

/// Parses and validates a NetworkSpec from YAML text. `file` names the
/// source in error messages.
inline NetworkSpec parse_network_spec(const std::string& text,
                                      const std::string& file = "<config>") {
  detail::ConfigReader rd(file);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(file, e.mark.line + 1, e.msg);
  }
  if (!root || !root.IsMap()) {
    throw ConfigError(file, 1, "top level must be a mapping");
  }
  rd.check_keys(root, {"dimension", "theta", "components", "clusters"},
                "network config");

  const auto dim_node = rd.require(root, "dimension", "network config");
  const int k = rd.integer(dim_node, "dimension");
  if (k < 1) rd.fail(dim_node, "dimension must be a positive integer");

  NetworkSpec spec = NetworkSpec::zeros(k);
  const auto theta_node = rd.require(root, "theta", "network config");
  spec.theta = rd.number(theta_node, "theta");
  if (!(spec.theta > 0.0) || !std::isfinite(spec.theta)) {
    rd.fail(theta_node, "theta must be positive and finite");
  }

  const auto comps = rd.require(root, "components", "network config");
  if (!comps.IsSequence()) rd.fail(comps, "components must be a list");
  if (static_cast<int>(comps.size()) != k) {
    rd.fail(comps, "components lists " + std::to_string(comps.size()) +
                       " entries but dimension is " + std::to_string(k));
  }
  std::vector<YAML::Node> comp_nodes;
  for (int j = 0; j < k; ++j) {
    const YAML::Node c = comps[static_cast<std::size_t>(j)];
    const std::string who = "component " + std::to_string(j + 1);
    if (!c.IsMap()) rd.fail(c, who + " must be a mapping");
    rd.check_keys(c, {"mu", "sigma2", "boundary", "reset", "refractory", "y0"},
                  who);
    spec.mu[j] = rd.number(rd.require(c, "mu", who), who + " mu");
    spec.sigma2[j] = rd.number(rd.require(c, "sigma2", who), who + " sigma2");
    spec.boundary[j] =
        rd.number(rd.require(c, "boundary", who), who + " boundary");
    spec.reset[j] = rd.number(rd.require(c, "reset", who), who + " reset");
    spec.refractory[j] =
        c["refractory"] ? rd.number(c["refractory"], who + " refractory") : 0.0;
    spec.y0[j] = c["y0"] ? rd.number(c["y0"], who + " y0") : spec.reset[j];
    comp_nodes.push_back(c);
  }

  std::vector<YAML::Node> cluster_nodes;
  if (const YAML::Node cls = root["clusters"]) {
    if (!cls.IsSequence()) rd.fail(cls, "clusters must be a list");
    for (std::size_t c = 0; c < cls.size(); ++c) {
      const YAML::Node n = cls[c];
      const std::string who = "cluster " + std::to_string(c + 1);
      if (!n.IsMap()) rd.fail(n, who + " must be a mapping");
      rd.check_keys(n, {"members", "mu", "sigma2"}, who);
      const auto mem = rd.require(n, "members", who);
      if (!mem.IsSequence()) rd.fail(mem, who + " members must be a list");
      Cluster cl;
      for (const auto& m : mem) {
        const int idx = rd.integer(m, who + " member");
        if (idx < 1 || idx > k) {
          rd.fail(m, who + " member " + std::to_string(idx) + " outside 1.." +
                         std::to_string(k));
        }
        cl.members.push_back(idx - 1);
      }
      cl.members = normalize_members(std::move(cl.members));
      if (std::adjacent_find(cl.members.begin(), cl.members.end()) !=
          cl.members.end()) {
        rd.fail(mem, who + " lists a member twice");
      }
      cl.mu = rd.number(rd.require(n, "mu", who), who + " mu");
      cl.sigma2 = rd.number(rd.require(n, "sigma2", who), who + " sigma2");
      spec.clusters.push_back(std::move(cl));
      cluster_nodes.push_back(n);
    }
  }

  try {
    validate(spec);
  } catch (const SpecError& e) {
    if (e.component() >= 0) {
      rd.fail(comp_nodes[static_cast<std::size_t>(e.component())], e.what());
    }
    if (e.cluster() >= 0) {
      rd.fail(cluster_nodes[static_cast<std::size_t>(e.cluster())], e.what());
    }
    rd.fail(root, e.what());
  }
  return spec;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline NetworkSpec load_network_spec(const std::string& path) {
  return parse_network_spec(read_file(path), path);
}

}  // namespace steinfpt
