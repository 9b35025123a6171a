#pragma once

// Metrics and training-log CSV files. Numbers use the shortest round-trip
// form from std::to_chars, so equal values always print the same bytes.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/eval/metrics.hpp"
#include "nct/models/checkpoint.hpp"
#include "nct/training/train_log.hpp"

namespace nct {

inline const std::string kMetricsHeader = "metric,value,n_a,n_b,kernel,seed";
inline const std::string kTrainLogHeader =
    "step,l_con,l_bound,lambda,grad_norm_con,grad_norm_bound,wall_ms";

inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf, p);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Splits CSV text into records of fields (RFC 4180: quoted fields may hold
/// commas, doubled quotes and line breaks).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw LoadError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = kMetricsHeader + "\n";
  for (const auto& r : rows) {
    out += csv_field(r.name) + "," + format_double(r.value) + "," + std::to_string(r.n_a) + "," +
           std::to_string(r.n_b) + "," + csv_field(r.kernel) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  write_file_atomic(path, metrics_csv(rows));
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace csv_detail {

inline double to_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw LoadError(where + ": '" + s + "' is not a number");
  }
  return v;
}

inline std::uint64_t to_u64(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw LoadError(where + ": '" + s + "' is not an unsigned integer");
  }
  return v;
}

}  // namespace csv_detail

inline std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& origin = "<csv>") {
  const auto records = parse_csv(text);
  if (records.empty() || parse_csv(kMetricsHeader).front() != records.front()) {
    throw LoadError(origin + ": missing metrics header");
  }
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    const std::string where = origin + ":" + std::to_string(i + 1);
    if (f.size() != 6) throw LoadError(where + ": expected 6 fields");
    MetricsRow r;
    r.name = f[0];
    r.value = csv_detail::to_double(f[1], where);
    r.n_a = csv_detail::to_u64(f[2], where);
    r.n_b = csv_detail::to_u64(f[3], where);
    r.kernel = f[4];
    r.seed = csv_detail::to_u64(f[5], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  return parse_metrics_csv(read_text_file(path), path);
}

/// Training log without wall time, so it is reproducible byte for byte.
inline std::string train_log_csv(const TrainLog& log, bool with_wall_time = false) {
  std::string out = with_wall_time ? kTrainLogHeader : kTrainLogHeader.substr(0, kTrainLogHeader.rfind(','));
  out += "\n";
  for (const auto& r : log.records) {
    out += std::to_string(r.step) + "," + format_double(r.l_con) + "," + format_double(r.l_bound) + "," +
           format_double(r.lambda) + "," + format_double(r.grad_norm_con) + "," +
           format_double(r.grad_norm_bound);
    if (with_wall_time) out += "," + format_double(r.wall_ms);
    out += "\n";
  }
  return out;
}

inline TrainLog parse_train_log_csv(const std::string& text, const std::string& origin = "<csv>") {
  const auto records = parse_csv(text);
  if (records.empty() || records.front().size() < 6 || records.front()[0] != "step") {
    throw LoadError(origin + ": missing training-log header");
  }
  const std::size_t width = records.front().size();
  TrainLog log;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    const std::string where = origin + ":" + std::to_string(i + 1);
    if (f.size() != width) throw LoadError(where + ": wrong field count");
    TrainRecord r;
    r.step = csv_detail::to_u64(f[0], where);
    r.l_con = csv_detail::to_double(f[1], where);
    r.l_bound = csv_detail::to_double(f[2], where);
    r.lambda = csv_detail::to_double(f[3], where);
    r.grad_norm_con = csv_detail::to_double(f[4], where);
    r.grad_norm_bound = csv_detail::to_double(f[5], where);
    if (width > 6) r.wall_ms = csv_detail::to_double(f[6], where);
    log.append(r);
  }
  return log;
}

}  // namespace nct
