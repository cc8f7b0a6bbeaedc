#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdpanel/cd_tests.hpp"
#include "cdpanel/dgp.hpp"
#include "cdpanel/errors.hpp"

namespace cdpanel {

/// A simulation grid: every combination of n, T, alphas and rho is one cell.
struct ExperimentSpec {
  std::vector<std::size_t> n{100};
  std::vector<std::size_t> T{100};
  std::size_t m0 = 1;
  std::vector<std::vector<double>> alphas{{1.0}};
  std::vector<double> rho{0.0};
  ErrorDist error_dist = ErrorDist::Gaussian;
  bool include_regressors = false;
  std::vector<std::size_t> m_values{1};
  std::size_t replications = 1000;
  std::uint64_t master_seed = 42;
  double level = 0.05;
  std::vector<TestName> tests{std::begin(kAllTests), std::end(kAllTests)};
  std::string output;  // empty = standard output

  std::vector<DgpConfig> cells() const {
    std::vector<DgpConfig> out;
    for (std::size_t nn : n) {
      for (std::size_t tt : T) {
        for (const auto& a : alphas) {
          for (double r : rho) {
            DgpConfig c;
            c.n = nn;
            c.T = tt;
            c.m0 = m0;
            c.alphas = a;
            c.rho_spatial = r;
            c.error_dist = error_dist;
            c.include_regressors = include_regressors;
            out.push_back(c);
          }
        }
      }
    }
    return out;
  }

  void validate() const {
    if (n.empty() || T.empty() || alphas.empty() || rho.empty() || m_values.empty()) {
      throw InputError("experiment grid has an empty dimension");
    }
    if (replications < 1) throw InputError("reps must be at least 1");
    if (!(level > 0.0 && level < 1.0)) throw InputError("level must lie in (0, 1)");
    if (tests.empty()) throw InputError("no tests selected");
    for (std::size_t m : m_values) {
      if (m < 1) throw InputError("m must be at least 1");
    }
    for (const auto& c : cells()) c.validate();
  }
};

namespace detail {

template <typename T>
std::vector<T> scalar_or_list(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_array()) return v.get<std::vector<T>>();
  return {v.get<T>()};
}

}  // namespace detail

/// Reads a grid from JSON. Scalars are accepted where lists are allowed; alphas may be a
/// single vector (one cell) or a list of vectors.
inline ExperimentSpec experiment_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("experiment spec must be a JSON object");
  static const char* known[] = {"n",    "T",    "m0",    "alphas", "rho",   "dist",  "model",
                                "m",    "reps", "seed",  "level",  "tests", "output"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw InputError("unknown experiment field '" + it.key() + "'");
  }
  ExperimentSpec s;
  try {
    if (j.contains("n")) s.n = detail::scalar_or_list<std::size_t>(j, "n");
    if (j.contains("T")) s.T = detail::scalar_or_list<std::size_t>(j, "T");
    if (j.contains("m0")) s.m0 = j.at("m0").get<std::size_t>();
    if (j.contains("alphas")) {
      const auto& a = j.at("alphas");
      if (a.is_number()) {
        s.alphas = {{a.get<double>()}};
      } else if (a.is_array() && !a.empty() && a.front().is_number()) {
        s.alphas = {a.get<std::vector<double>>()};
      } else {
        s.alphas = a.get<std::vector<std::vector<double>>>();
      }
    } else {
      s.alphas = {std::vector<double>(s.m0, 1.0)};
    }
    if (j.contains("rho")) s.rho = detail::scalar_or_list<double>(j, "rho");
    if (j.contains("dist")) s.error_dist = error_dist_from_string(j.at("dist").get<std::string>());
    if (j.contains("model")) {
      const auto model = j.at("model").get<std::string>();
      if (model == "factor") {
        s.include_regressors = false;
      } else if (model == "regression") {
        s.include_regressors = true;
      } else {
        throw InputError("model must be 'factor' or 'regression'");
      }
    }
    if (j.contains("m")) s.m_values = detail::scalar_or_list<std::size_t>(j, "m");
    if (j.contains("reps")) s.replications = j.at("reps").get<std::size_t>();
    if (j.contains("seed")) s.master_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("level")) s.level = j.at("level").get<double>();
    if (j.contains("tests")) {
      s.tests.clear();
      for (const auto& t : detail::scalar_or_list<std::string>(j, "tests")) {
        s.tests.push_back(test_name_from_string(t));
      }
    }
    if (j.contains("output")) s.output = j.at("output").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

}  // namespace cdpanel
