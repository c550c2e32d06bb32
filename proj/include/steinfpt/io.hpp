#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "steinfpt/errors.hpp"
#include "steinfpt/fpt_reset.hpp"
#include "steinfpt/hash.hpp"
#include "steinfpt/ou_sim.hpp"
#include "steinfpt/stein_sim.hpp"

// File formats (version 1). All reals are printed with 17 significant
// digits, so every value parses back to the identical double. Component and
// cluster indices are one-based in files.
//
// Path files (jump or grid), csv flavour:
//   # steinfpt-path v1
//   # <key>: <value>          header lines: kind, params_hash, seed, ...
//   <column names>
//   <rows>
// ndjson flavour: first line is the header object, one object per row after.
//   jump columns: time, source_kind (N+ N- M+ M-), source_index, amplitude
//   grid columns: time, y1..yk
//
// Marked trains: newline-delimited records
//   {"cumulative_time":..,"tau":..,"marks":[..],"pre_state":[..],"post_state":[..]}
// (or csv: cumulative_time,tau,marks,pre_1..pre_k,post_1..post_k with marks
// joined by ';'), plus a JSON sidecar header written by train_header().

namespace steinfpt {

enum class TableFormat { kCsv, kNdjson };

inline TableFormat parse_table_format(const std::string& s) {
  if (s == "csv") return TableFormat::kCsv;
  if (s == "ndjson") return TableFormat::kNdjson;
  throw FormatError("unknown format '" + s + "' (expected csv or ndjson)");
}

inline const char* format_extension(TableFormat f) {
  return f == TableFormat::kCsv ? "csv" : "ndjson";
}

namespace detail {

inline std::string json_array(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += fmt17(v[i]);
  }
  return s + "]";
}

inline std::string join_marks(const Marks& m, char sep) {
  std::string s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(m[i] + 1);
  }
  return s;
}

inline void write_header(std::ostream& os, TableFormat fmt,
                         const std::vector<std::pair<std::string, std::string>>& kv,
                         const std::string& columns) {
  if (fmt == TableFormat::kCsv) {
    os << "# steinfpt-path v1\n";
    for (const auto& [k, v] : kv) os << "# " << k << ": " << v << "\n";
    os << columns << "\n";
  } else {
    os << "{\"format\":\"steinfpt-path\",\"version\":1";
    for (const auto& [k, v] : kv) os << ",\"" << k << "\":\"" << v << "\"";
    os << "}\n";
  }
}

inline std::string cluster_list(const std::vector<Members>& clusters) {
  std::string s;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (c) s += ";";
    for (std::size_t i = 0; i < clusters[c].size(); ++i) {
      if (i) s += " ";
      s += std::to_string(clusters[c][i] + 1);
    }
  }
  return s;
}

inline std::string csv_vector(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += fmt17(v[i]);
  }
  return s;
}

inline Vector parse_csv_vector(const std::string& s) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

inline SourceKind parse_source(const std::string& s) {
  if (s == "N+") return SourceKind::kUnitExcitatory;
  if (s == "N-") return SourceKind::kUnitInhibitory;
  if (s == "M+") return SourceKind::kClusterExcitatory;
  if (s == "M-") return SourceKind::kClusterInhibitory;
  throw FormatError("unknown source kind '" + s + "'");
}

}  // namespace detail

/// Writes a Stein path: header (params hash, seed, k, theta, horizon, x0,
/// clusters) and one row per event.
inline void write_jump_path(std::ostream& os, const JumpPath& path,
                            const std::string& params_hash, std::uint64_t seed,
                            TableFormat fmt) {
  detail::write_header(os, fmt,
                       {{"kind", "jump"},
                        {"params_hash", params_hash},
                        {"seed", std::to_string(seed)},
                        {"k", std::to_string(path.k())},
                        {"theta", fmt17(path.theta)},
                        {"horizon", fmt17(path.horizon)},
                        {"x0", detail::csv_vector(path.x0)},
                        {"clusters", detail::cluster_list(path.clusters)}},
                       "time,source_kind,source_index,amplitude");
  for (const auto& e : path.events) {
    if (fmt == TableFormat::kCsv) {
      os << fmt17(e.time) << ',' << source_tag(e.source) << ',' << e.index + 1
         << ',' << fmt17(e.amplitude) << '\n';
    } else {
      os << "{\"time\":" << fmt17(e.time) << ",\"source_kind\":\""
         << source_tag(e.source) << "\",\"source_index\":" << e.index + 1
         << ",\"amplitude\":" << fmt17(e.amplitude) << "}\n";
    }
  }
}

/// Reads a csv jump path back (header fields plus events).
inline JumpPath read_jump_path_csv(std::istream& is) {
  JumpPath p;
  std::string line;
  if (!std::getline(is, line) || line != "# steinfpt-path v1") {
    throw FormatError("missing '# steinfpt-path v1' header");
  }
  while (std::getline(is, line) && line.rfind("# ", 0) == 0) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) continue;
    const auto key = line.substr(2, colon - 2);
    const auto val = line.substr(colon + 2);
    if (key == "kind" && val != "jump") throw FormatError("not a jump path");
    if (key == "theta") p.theta = std::stod(val);
    if (key == "horizon") p.horizon = std::stod(val);
    if (key == "x0") p.x0 = detail::parse_csv_vector(val);
    if (key == "clusters" && !val.empty()) {
      std::stringstream ss(val);
      std::string group;
      while (std::getline(ss, group, ';')) {
        Members m;
        std::stringstream gs(group);
        int idx;
        while (gs >> idx) m.push_back(idx - 1);
        p.clusters.push_back(m);
      }
    }
  }
  if (line != "time,source_kind,source_index,amplitude") {
    throw FormatError("unexpected jump path columns: " + line);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t, kind, idx, amp;
    std::getline(ss, t, ',');
    std::getline(ss, kind, ',');
    std::getline(ss, idx, ',');
    std::getline(ss, amp, ',');
    p.events.push_back({std::stod(t), detail::parse_source(kind),
                        std::stoi(idx) - 1, std::stod(amp)});
  }
  return p;
}

inline void write_grid_path(std::ostream& os, const GridPath& path,
                            const std::string& params_hash, std::uint64_t seed,
                            OuScheme scheme, TableFormat fmt) {
  const auto k = path.states.cols();
  std::string cols = "time";
  for (Eigen::Index j = 0; j < k; ++j) cols += ",y" + std::to_string(j + 1);
  detail::write_header(os, fmt,
                       {{"kind", "grid"},
                        {"params_hash", params_hash},
                        {"seed", std::to_string(seed)},
                        {"scheme", scheme_tag(scheme)},
                        {"k", std::to_string(k)},
                        {"h", fmt17(path.h)}},
                       cols);
  for (Eigen::Index i = 0; i < path.states.rows(); ++i) {
    const Vector row = path.states.row(i).transpose();
    if (fmt == TableFormat::kCsv) {
      os << fmt17(path.time(i)) << ',' << detail::csv_vector(row) << '\n';
    } else {
      os << "{\"time\":" << fmt17(path.time(i))
         << ",\"y\":" << detail::json_array(row) << "}\n";
    }
  }
}

/// Reads the rows of a csv grid path as (time, state) pairs.
inline std::vector<std::pair<double, Vector>> read_grid_path_csv(std::istream& is) {
  std::vector<std::pair<double, Vector>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("time", 0) == 0) continue;
    const Vector v = detail::parse_csv_vector(line);
    rows.emplace_back(v[0], v.tail(v.size() - 1));
  }
  return rows;
}

/// k sizes the csv header; -1 takes it from the first record.
inline void write_train_records(std::ostream& os, const MarkedTrain& train,
                                TableFormat fmt, int k_hint = -1) {
  if (fmt == TableFormat::kCsv) {
    const Eigen::Index k =
        k_hint >= 0 ? k_hint
                    : (train.records.empty() ? 0 : train.records.front().pre_state.size());
    os << "cumulative_time,tau,marks";
    for (Eigen::Index j = 0; j < k; ++j) os << ",pre_" << j + 1;
    for (Eigen::Index j = 0; j < k; ++j) os << ",post_" << j + 1;
    os << '\n';
    for (const auto& r : train.records) {
      os << fmt17(r.cumulative_time) << ',' << fmt17(r.tau) << ','
         << detail::join_marks(r.marks, ';') << ','
         << detail::csv_vector(r.pre_state) << ','
         << detail::csv_vector(r.post_state) << '\n';
    }
    return;
  }
  for (const auto& r : train.records) {
    os << "{\"cumulative_time\":" << fmt17(r.cumulative_time)
       << ",\"tau\":" << fmt17(r.tau) << ",\"marks\":["
       << detail::join_marks(r.marks, ',')
       << "],\"pre_state\":" << detail::json_array(r.pre_state)
       << ",\"post_state\":" << detail::json_array(r.post_state) << "}\n";
  }
}

inline nlohmann::json train_header(const MarkedTrain& train, int k,
                                   TableFormat fmt) {
  nlohmann::json stop;
  stop["max_spikes"] = train.stop.bounded_spikes()
                           ? nlohmann::json(train.stop.max_spikes)
                           : nlohmann::json(nullptr);
  stop["horizon"] = std::isfinite(train.stop.horizon)
                        ? nlohmann::json(train.stop.horizon)
                        : nlohmann::json(nullptr);
  return {{"format", "steinfpt-train"},
          {"version", 1},
          {"record_format", format_extension(fmt)},
          {"k", k},
          {"spec_hash", train.spec_hash},
          {"generator", train.generator.str()},
          {"seed", train.seed},
          {"stop", stop},
          {"records", train.records.size()},
          {"grid_ties", train.grid_ties}};
}

/// Parses ndjson records written by write_train_records.
inline std::vector<SpikeRecord> read_train_records(std::istream& is) {
  std::vector<SpikeRecord> out;
  std::string line;
  auto vec = [](const nlohmann::json& a) {
    Vector v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    }
    return v;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad train record: ") + e.what());
    }
    SpikeRecord r;
    r.cumulative_time = j.at("cumulative_time").get<double>();
    r.tau = j.at("tau").get<double>();
    for (const auto& m : j.at("marks")) r.marks.push_back(m.get<int>() - 1);
    r.pre_state = vec(j.at("pre_state"));
    r.post_state = vec(j.at("post_state"));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace steinfpt
