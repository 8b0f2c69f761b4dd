#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rqiqn/experiment/serialization.hpp"

namespace rqiqn::experiment {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// One evaluation point of a training run. Missing values are NaN
/// (written as null / empty).
struct MetricsRecord {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  double loss = kMissing;  // mean training loss since the previous record
  double epsilon = 0.0;
  double eval_return_mean = kMissing;
  double eval_return_std = kMissing;
  double success_rate = kMissing;
  double collision_rate = kMissing;
  double timeout_rate = kMissing;
  std::vector<double> probe_state_std;  // learned quantile std per probe state
  double time_succ = kMissing;          // mean episode time over successes, s
  double energy_succ = kMissing;        // mean control-effort proxy over successes
  double wall_clock = 0.0;              // s since the run started
  std::optional<std::string> error;
};

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return kMissing;
  return j.at(key).get<double>();
}

inline bool same_number(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace detail

/// Field-wise equality with NaN == NaN. `ignore_wall_clock` compares the
/// deterministic content only.
inline bool same_record(const MetricsRecord& a, const MetricsRecord& b, bool ignore_wall_clock = false) {
  using detail::same_number;
  if (a.probe_state_std.size() != b.probe_state_std.size()) return false;
  for (std::size_t i = 0; i < a.probe_state_std.size(); ++i) {
    if (!same_number(a.probe_state_std[i], b.probe_state_std[i])) return false;
  }
  return a.seed == b.seed && a.step == b.step && same_number(a.loss, b.loss) && same_number(a.epsilon, b.epsilon) &&
         same_number(a.eval_return_mean, b.eval_return_mean) && same_number(a.eval_return_std, b.eval_return_std) &&
         same_number(a.success_rate, b.success_rate) && same_number(a.collision_rate, b.collision_rate) &&
         same_number(a.timeout_rate, b.timeout_rate) && same_number(a.time_succ, b.time_succ) &&
         same_number(a.energy_succ, b.energy_succ) && (ignore_wall_clock || same_number(a.wall_clock, b.wall_clock)) &&
         a.error == b.error;
}

inline json record_to_json(const MetricsRecord& r) {
  using detail::number_or_null;
  json probes = json::array();
  for (double v : r.probe_state_std) probes.push_back(number_or_null(v));
  json j{{"seed", r.seed},
         {"step", r.step},
         {"loss", number_or_null(r.loss)},
         {"epsilon", number_or_null(r.epsilon)},
         {"eval_return_mean", number_or_null(r.eval_return_mean)},
         {"eval_return_std", number_or_null(r.eval_return_std)},
         {"success_rate", number_or_null(r.success_rate)},
         {"collision_rate", number_or_null(r.collision_rate)},
         {"timeout_rate", number_or_null(r.timeout_rate)},
         {"probe_state_std", probes},
         {"time_succ", number_or_null(r.time_succ)},
         {"energy_succ_proxy", number_or_null(r.energy_succ)},
         {"wall_clock", number_or_null(r.wall_clock)}};
  if (r.error) j["error"] = *r.error;
  return j;
}

inline MetricsRecord record_from_json(const json& j) {
  using detail::number_from;
  MetricsRecord r;
  r.seed = j.value("seed", std::uint64_t{0});
  r.step = j.at("step").get<std::uint64_t>();
  r.loss = number_from(j, "loss");
  r.epsilon = number_from(j, "epsilon");
  r.eval_return_mean = number_from(j, "eval_return_mean");
  r.eval_return_std = number_from(j, "eval_return_std");
  r.success_rate = number_from(j, "success_rate");
  r.collision_rate = number_from(j, "collision_rate");
  r.timeout_rate = number_from(j, "timeout_rate");
  for (const auto& v : j.value("probe_state_std", json::array())) {
    r.probe_state_std.push_back(v.is_null() ? kMissing : v.get<double>());
  }
  r.time_succ = number_from(j, "time_succ");
  r.energy_succ = number_from(j, "energy_succ_proxy");
  r.wall_clock = number_from(j, "wall_clock");
  if (j.contains("error")) r.error = j.at("error").get<std::string>();
  return r;
}

enum class ExportFormat { csv, json_lines };

inline std::vector<std::string> csv_columns(std::size_t probe_states) {
  std::vector<std::string> cols{"step", "loss", "epsilon", "eval_return_mean", "eval_return_std",
                                "success_rate", "collision_rate", "timeout_rate"};
  for (std::size_t i = 0; i < probe_states; ++i) cols.push_back("probe_state_std_" + std::to_string(i));
  for (const char* c : {"time_succ", "energy_succ_proxy", "wall_clock", "seed", "error"}) cols.emplace_back(c);
  return cols;
}

namespace detail {

inline std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

/// Writes records as CSV (one header row) or JSON lines. probe_states fixes
/// the number of probe columns when records is empty.
inline void export_records(std::ostream& out, const std::vector<MetricsRecord>& records, ExportFormat format,
                           std::size_t probe_states = 0) {
  if (format == ExportFormat::json_lines) {
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    return;
  }
  if (!records.empty()) probe_states = records.front().probe_state_std.size();
  const auto cols = csv_columns(probe_states);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  using detail::csv_number;
  for (const auto& r : records) {
    out << r.step << ',' << csv_number(r.loss) << ',' << csv_number(r.epsilon) << ',' << csv_number(r.eval_return_mean)
        << ',' << csv_number(r.eval_return_std) << ',' << csv_number(r.success_rate) << ','
        << csv_number(r.collision_rate) << ',' << csv_number(r.timeout_rate);
    for (std::size_t i = 0; i < probe_states; ++i) {
      out << ',' << (i < r.probe_state_std.size() ? csv_number(r.probe_state_std[i]) : "");
    }
    std::string err = r.error.value_or("");
    for (char& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    out << ',' << csv_number(r.time_succ) << ',' << csv_number(r.energy_succ) << ',' << csv_number(r.wall_clock) << ','
        << r.seed << ',' << err << '\n';
  }
}

inline void export_records(const std::string& path, const std::vector<MetricsRecord>& records, ExportFormat format,
                           std::size_t probe_states = 0) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  export_records(out, records, format, probe_states);
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<MetricsRecord> parse_json_lines(std::istream& in) {
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(json::parse(line)));
  }
  return out;
}

inline std::vector<MetricsRecord> load_json_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_json_lines(in);
}

/// Append-only JSON-lines sink; each record is flushed as it is written.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : path_(path), out_(path, std::ios::app) {
    if (!out_) throw IoError("cannot open metrics file '" + path + "' for appending");
  }

  void write(const MetricsRecord& r) {
    out_ << record_to_json(r).dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("failed writing metrics file '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace rqiqn::experiment
