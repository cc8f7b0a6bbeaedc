#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdpanel/cd_tests.hpp"
#include "cdpanel/csv.hpp"
#include "cdpanel/dgp.hpp"
#include "cdpanel/monte_carlo.hpp"

#ifndef CDPANEL_VERSION
#define CDPANEL_VERSION "0.1.0"
#endif

namespace cdpanel {

inline constexpr const char* kVersion = CDPANEL_VERSION;

/// One output row. Keys keep insertion order so JSON and CSV share a column order.
using ResultRecord = nlohmann::ordered_json;

/// Leading fields carried by every record, in output order.
inline const std::vector<std::string>& core_record_fields() {
  static const std::vector<std::string> fields{"test_name", "statistic", "p_value", "reject",
                                               "n",         "T",         "m_used",  "seed"};
  return fields;
}

/// 64-bit FNV-1a over bytes, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::ordered_json config_to_json(const DgpConfig& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  j["T"] = c.T;
  j["m0"] = c.m0;
  j["alphas"] = c.alphas;
  j["rho"] = c.rho_spatial;
  j["dist"] = std::string(to_string(c.error_dist));
  j["model"] = c.include_regressors ? "regression" : "factor";
  j["loadings"] = {c.loading_params.mean1, c.loading_params.var1, c.loading_params.mean2,
                   c.loading_params.var2};
  j["betas"] = {c.beta_params.mean1, c.beta_params.var1, c.beta_params.mean2, c.beta_params.var2};
  j["ar"] = {c.ar_params.rho_d,       c.ar_params.rho_f,       c.ar_params.rho_x_max,
             c.ar_params.gamma_x1_lo, c.ar_params.gamma_x1_hi, c.ar_params.gamma_x2_lo,
             c.ar_params.gamma_x2_hi};
  j["intercepts"] = {c.intercept_mean, c.intercept_var};
  return j;
}

/// Provenance hash of everything that determines a simulated cell except m and the seed.
inline std::string config_hash(const DgpConfig& c, std::size_t replications, double level) {
  nlohmann::ordered_json j = config_to_json(c);
  j["reps"] = replications;
  j["level"] = level;
  return fnv1a_hex(j.dump());
}

inline ResultRecord make_test_record(const TestOutcome& o, std::size_t n, std::size_t T,
                                     std::size_t m_used, std::uint64_t seed,
                                     const std::string& filter, double theta_hat,
                                     const std::string& input_hash) {
  ResultRecord r;
  r["test_name"] = std::string(to_string(o.test_name));
  r["statistic"] = o.statistic;
  r["p_value"] = o.p_value;
  r["reject"] = o.reject;
  r["n"] = n;
  r["T"] = T;
  r["m_used"] = m_used;
  r["seed"] = seed;
  r["level"] = o.level;
  r["filter"] = filter;
  r["theta_hat"] = theta_hat;
  r["config_hash"] = input_hash;
  r["version"] = kVersion;
  return r;
}

/// A simulated cell: statistic holds the mean over replications; p_value and reject are null.
inline ResultRecord make_simulation_record(const McResult& res, TestName t) {
  const TestSummary& s = res.summary(t);
  const DgpConfig& c = res.config;
  ResultRecord r;
  r["test_name"] = std::string(to_string(t));
  r["statistic"] = s.mean;
  r["p_value"] = nullptr;
  r["reject"] = nullptr;
  r["n"] = c.n;
  r["T"] = c.T;
  r["m_used"] = res.m_used;
  r["seed"] = res.master_seed;
  r["level"] = res.level;
  r["rejection_rate"] = s.rejection_rate;
  r["rejections"] = s.rejections;
  r["sd"] = s.sd;
  r["replications"] = res.replications;
  r["failures"] = res.failures;
  r["mean_theta_hat"] = res.mean_theta_hat;
  r["m0"] = c.m0;
  r["alphas"] = c.alphas;
  r["rho"] = c.rho_spatial;
  r["dist"] = std::string(to_string(c.error_dist));
  r["model"] = c.include_regressors ? "regression" : "factor";
  r["config_hash"] = config_hash(c, res.requested, res.level);
  r["version"] = kVersion;
  return r;
}

enum class OutputFormat { Json, Csv };

inline OutputFormat output_format_from_string(const std::string& s) {
  if (s == "json" || s == "JSON") return OutputFormat::Json;
  if (s == "csv" || s == "CSV") return OutputFormat::Csv;
  throw InputError("unknown output format '" + s + "' (expected json or csv)");
}

inline void write_json(std::ostream& out, const std::vector<ResultRecord>& records) {
  out << nlohmann::ordered_json(records).dump(2) << '\n';
}

namespace detail {

inline std::string csv_cell(const nlohmann::ordered_json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return format_real(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  // arrays: space-separated inside one cell
  std::string s;
  for (const auto& e : v) s += (s.empty() ? "" : " ") + csv_cell(e);
  return s;
}

}  // namespace detail

/// Header is the union of keys in first-seen order; absent keys give empty cells.
inline void write_csv(std::ostream& out, const std::vector<ResultRecord>& records) {
  if (records.empty()) return;
  std::vector<std::string> header;
  for (const auto& rec : records) {
    for (auto it = rec.begin(); it != rec.end(); ++it) {
      if (std::find(header.begin(), header.end(), it.key()) == header.end()) header.push_back(it.key());
    }
  }
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& rec : records) {
    for (std::size_t k = 0; k < header.size(); ++k) {
      out << (k ? "," : "");
      if (rec.contains(header[k])) out << detail::csv_cell(rec.at(header[k]));
    }
    out << '\n';
  }
}

inline void write_records(std::ostream& out, const std::vector<ResultRecord>& records,
                          OutputFormat format) {
  if (format == OutputFormat::Json) {
    write_json(out, records);
  } else {
    write_csv(out, records);
  }
}

}  // namespace cdpanel
