#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "pentadrive/control.hpp"
#include "pentadrive/errors.hpp"
#include "pentadrive/metrics.hpp"
#include "pentadrive/tuner.hpp"

namespace pentadrive {

/// Shortest decimal string that round-trips to the exact same double.
inline std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError("invalid number '" + std::string(s) + "' in " + where);
  return v;
}

inline long parse_long(std::string_view s, const std::string& where) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError("invalid integer '" + std::string(s) + "' in " + where);
  return v;
}

/// Writes content to a sibling temp file and renames it into place, so an
/// interrupted run never leaves a truncated artifact under the final name.
inline void atomic_write_text(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed for " + path.string() + ": " + ec.message());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// -------- trace CSV (versioned schema, consumed by the metrics module) -----

inline constexpr const char* kTraceTag = "# pentadrive-trace v1";
inline constexpr const char* kTraceColumns =
    "t,omega_ref,omega_m,id_ref,iq_ref,i_alpha_ref,i_beta_ref,i_x_ref,i_y_ref,"
    "i_alpha,i_beta,i_x,i_y,u1,u2,u3,u4,u5,sc,j_total,j_ab,j_xy,"
    "torque,torque_ref,torque_load";

inline std::string trace_to_csv(const std::vector<LogRecord>& records) {
  std::string out;
  out.reserve(records.size() * 160 + 256);
  out += kTraceTag;
  out += '\n';
  out += kTraceColumns;
  out += '\n';
  for (const LogRecord& r : records) {
    out += fmt_double(r.t);
    for (double v : {r.omega_ref, r.omega_m, r.id_ref, r.iq_ref, r.i_alpha_ref,
                     r.i_beta_ref, r.i_x_ref, r.i_y_ref, r.i_alpha, r.i_beta,
                     r.i_x, r.i_y}) {
      out += ',';
      out += fmt_double(v);
    }
    for (int i = 0; i < 5; ++i) {
      out += ',';
      out += char('0' + r.u.u[i]);
    }
    out += ',';
    out += std::to_string(r.sc);
    for (double v : {r.j_total, r.j_ab, r.j_xy, r.torque, r.torque_ref,
                     r.torque_load}) {
      out += ',';
      out += fmt_double(v);
    }
    out += '\n';
  }
  return out;
}

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<LogRecord>& records) {
  atomic_write_text(path, trace_to_csv(records));
}

inline std::vector<LogRecord> read_trace_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kTraceTag)
    throw IoError("unrecognized trace format in " + path.string() +
                  " (expected '" + kTraceTag + "')");
  if (!std::getline(in, line) || line != kTraceColumns)
    throw IoError("unexpected trace columns in " + path.string());

  std::vector<LogRecord> records;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 25)
      throw IoError("line " + std::to_string(lineno) + " of " + path.string() +
                    ": expected 25 fields, got " + std::to_string(f.size()));
    const std::string where = "trace line " + std::to_string(lineno);
    LogRecord r;
    int i = 0;
    r.t = parse_double(f[i++], where);
    r.omega_ref = parse_double(f[i++], where);
    r.omega_m = parse_double(f[i++], where);
    r.id_ref = parse_double(f[i++], where);
    r.iq_ref = parse_double(f[i++], where);
    r.i_alpha_ref = parse_double(f[i++], where);
    r.i_beta_ref = parse_double(f[i++], where);
    r.i_x_ref = parse_double(f[i++], where);
    r.i_y_ref = parse_double(f[i++], where);
    r.i_alpha = parse_double(f[i++], where);
    r.i_beta = parse_double(f[i++], where);
    r.i_x = parse_double(f[i++], where);
    r.i_y = parse_double(f[i++], where);
    for (int b = 0; b < 5; ++b)
      r.u.u[b] = static_cast<std::uint8_t>(parse_long(f[i++], where));
    r.sc = static_cast<int>(parse_long(f[i++], where));
    r.j_total = parse_double(f[i++], where);
    r.j_ab = parse_double(f[i++], where);
    r.j_xy = parse_double(f[i++], where);
    r.torque = parse_double(f[i++], where);
    r.torque_ref = parse_double(f[i++], where);
    r.torque_load = parse_double(f[i++], where);
    records.push_back(r);
  }
  return records;
}

// -------- dataset CSV -------------------------------------------------------

inline constexpr const char* kDatasetColumns =
    "omega0,omega_ref,kp,ki,lambda_xy,lambda_sc,PO,Tr,ITAE,Rt,Exy,ASF";

inline std::string dataset_to_csv(const std::vector<DatasetRecord>& records) {
  std::string out;
  out += kDatasetColumns;
  out += '\n';
  for (const DatasetRecord& r : records) {
    out += fmt_double(r.omega0);
    for (double v : {r.omega_ref, r.theta.kp, r.theta.ki, r.theta.lambda_xy,
                     r.theta.lambda_sc, r.pi.po, r.pi.tr, r.pi.itae, r.pi.rt,
                     r.pi.exy, r.pi.asf}) {
      out += ',';
      out += fmt_double(v);
    }
    out += '\n';
  }
  return out;
}

inline void write_dataset_csv(const std::filesystem::path& path,
                              const std::vector<DatasetRecord>& records) {
  atomic_write_text(path, dataset_to_csv(records));
}

inline std::vector<DatasetRecord> read_dataset_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kDatasetColumns)
    throw IoError("unrecognized dataset header in " + path.string());
  std::vector<DatasetRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12)
      throw IoError("line " + std::to_string(lineno) + " of " + path.string() +
                    ": expected 12 fields, got " + std::to_string(f.size()));
    const std::string where = "dataset line " + std::to_string(lineno);
    DatasetRecord r;
    r.omega0 = parse_double(f[0], where);
    r.omega_ref = parse_double(f[1], where);
    r.theta.kp = parse_double(f[2], where);
    r.theta.ki = parse_double(f[3], where);
    r.theta.lambda_xy = parse_double(f[4], where);
    r.theta.lambda_sc = parse_double(f[5], where);
    r.pi.po = parse_double(f[6], where);
    r.pi.tr = parse_double(f[7], where);
    r.pi.itae = parse_double(f[8], where);
    r.pi.rt = parse_double(f[9], where);
    r.pi.exy = parse_double(f[10], where);
    r.pi.asf = parse_double(f[11], where);
    records.push_back(r);
  }
  return records;
}

// -------- JSON helpers ------------------------------------------------------

inline nlohmann::json indicators_to_json(const IndicatorVector& pi) {
  return nlohmann::json{{"PO", pi.po},   {"Tr", pi.tr},   {"ITAE", pi.itae},
                        {"Rt", pi.rt},   {"Exy", pi.exy}, {"ASF", pi.asf},
                        {"rose", pi.rose}};
}

inline nlohmann::json theta_to_json(const ControllerParams& t) {
  return nlohmann::json{{"kp", t.kp},
                        {"ki", t.ki},
                        {"lambda_xy", t.lambda_xy},
                        {"lambda_sc", t.lambda_sc}};
}

}  // namespace pentadrive
