#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cdpanel/cce.hpp"
#include "cdpanel/cd_tests.hpp"
#include "cdpanel/csv.hpp"
#include "cdpanel/errors.hpp"
#include "cdpanel/experiment.hpp"
#include "cdpanel/factor_estimation.hpp"
#include "cdpanel/monte_carlo.hpp"
#include "cdpanel/records.hpp"

namespace cdpanel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Parses "3", "1:4", "1-4" or "1,2,5" into a list of factor counts.
inline std::vector<std::size_t> parse_m_range(const std::string& text) {
  auto to_size = [&](const std::string& s) -> std::size_t {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size() || v < 1) {
      throw InputError("bad value '" + s + "' in --m (expected positive integers)");
    }
    return static_cast<std::size_t>(v);
  };
  std::vector<std::size_t> out;
  const auto sep = text.find_first_of(":-");
  if (sep != std::string::npos) {
    const std::size_t lo = to_size(text.substr(0, sep));
    const std::size_t hi = to_size(text.substr(sep + 1));
    if (hi < lo) throw InputError("empty --m range '" + text + "'");
    for (std::size_t m = lo; m <= hi; ++m) out.push_back(m);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_size(item));
  if (out.empty()) throw InputError("--m is empty");
  return out;
}

inline std::vector<TestName> parse_test_list(const std::vector<std::string>& names) {
  std::vector<TestName> out;
  for (const auto& raw : names) {
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      if (item == "all" || item == "ALL") {
        out.assign(std::begin(kAllTests), std::end(kAllTests));
        continue;
      }
      out.push_back(test_name_from_string(item));
    }
  }
  if (out.empty()) out.assign(std::begin(kAllTests), std::end(kAllTests));
  return out;
}

/// Where records go: "json"/"csv" select a format on standard output, anything else is a
/// file path whose extension picks the format unless `format` overrides it.
struct OutputTarget {
  std::string path;  // empty = standard output
  OutputFormat format = OutputFormat::Json;
};

inline OutputTarget resolve_output(const std::string& output, const std::string& format) {
  OutputTarget t;
  if (output == "json" || output == "csv" || output == "JSON" || output == "CSV") {
    t.format = output_format_from_string(output);
  } else if (!output.empty() && output != "-") {
    t.path = output;
    const bool csv = output.size() >= 4 && output.compare(output.size() - 4, 4, ".csv") == 0;
    t.format = csv ? OutputFormat::Csv : OutputFormat::Json;
  }
  if (!format.empty()) t.format = output_format_from_string(format);
  return t;
}

inline void emit_records(const OutputTarget& target, const std::vector<ResultRecord>& records,
                         std::ostream& out) {
  if (target.path.empty()) {
    write_records(out, records, target.format);
    return;
  }
  std::ofstream file(target.path, std::ios::binary);
  if (!file) throw InputError("cannot write '" + target.path + "'");
  write_records(file, records, target.format);
}

struct TestArgs {
  std::string input;
  std::string layout = "wide";
  std::string m = "1";
  std::string filter = "demean";
  double level = 0.05;
  std::vector<std::string> tests;
  std::uint64_t seed = 42;
  std::string output = "json";
  std::string format;
  std::vector<std::string> x_cols;
  std::vector<std::string> d_cols;
  std::string unit_col = "unit";
  std::string time_col = "time";
  std::string value_col = "value";
  bool no_intercept = false;
};

namespace detail {

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string unit_label(const PanelData& data, std::size_t i) {
  return i < data.unit_labels.size() ? data.unit_labels[i] : std::to_string(i);
}

/// Residuals after removing the designated observed effects.
inline PanelMatrix filter_panel(const PanelData& data, const TestArgs& args) {
  const auto T = static_cast<Eigen::Index>(data.y.T());
  if (args.filter == "demean") {
    if (!data.X.empty() || data.D.cols() > 0) {
      throw InputError("--filter demean takes no regressor or common-factor columns");
    }
    return demean_units(data.y);
  }
  if (args.filter == "ols") {
    const Eigen::Index kx = data.X.empty() ? 0 : data.X.front().cols();
    const Eigen::Index kd = data.D.cols();
    if (kx + kd == 0) throw InputError("--filter ols needs --x-cols or --d-cols");
    const Eigen::Index k0 = args.no_intercept ? 0 : 1;
    Matrix resid(static_cast<Eigen::Index>(data.y.n()), T);
    for (std::size_t i = 0; i < data.y.n(); ++i) {
      Eigen::MatrixXd R(T, k0 + kd + kx);
      if (k0) R.col(0).setOnes();
      if (kd) R.middleCols(k0, kd) = data.D;
      if (kx) R.rightCols(kx) = data.X[i];
      const auto ii = static_cast<Eigen::Index>(i);
      try {
        resid.row(ii) = ols_filter(data.y.values().row(ii).transpose(), R).residuals.transpose();
      } catch (const SingularDesign&) {
        throw SingularUnitDesign(i);
      }
    }
    return PanelMatrix(std::move(resid));
  }
  if (args.filter == "cce") {
    if (data.X.empty()) throw InputError("--filter cce needs regressor columns (--x-cols)");
    Eigen::MatrixXd D(T, 1 + data.D.cols());
    D.col(0).setOnes();
    if (data.D.cols() > 0) D.rightCols(data.D.cols()) = data.D;
    return cce_fit(RegressionDesign{data.y, data.X, D}).vhat;
  }
  throw InputError("unknown --filter '" + args.filter + "' (expected demean, ols or cce)");
}

inline void print_table(std::ostream& out, const std::vector<ResultRecord>& records) {
  char line[160];
  std::snprintf(line, sizeof(line), "%4s  %-10s %14s %12s %7s %10s\n", "m", "test", "statistic",
                "p_value", "reject", "theta_hat");
  out << line;
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%4zu  %-10s %14.6f %12.6g %7s %10.6f\n",
                  r["m_used"].get<std::size_t>(), r["test_name"].get<std::string>().c_str(),
                  r["statistic"].get<double>(), r["p_value"].get<double>(),
                  r["reject"].get<bool>() ? "yes" : "no", r["theta_hat"].get<double>());
    out << line;
  }
}

}  // namespace detail

/// Runs the residual pipeline on a CSV panel for each requested m.
inline int cmd_test(const TestArgs& args, std::ostream& out, std::ostream& err) {
  PanelData data;
  try {
    CsvColumns cols;
    cols.unit = args.unit_col;
    cols.time = args.time_col;
    cols.value = args.value_col;
    cols.regressors = args.x_cols;
    cols.common_factors = args.d_cols;
    data = load_panel_csv(args.input, csv_layout_from_string(args.layout), cols);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  std::size_t current_m = 0;
  try {
    const std::vector<std::size_t> ms = parse_m_range(args.m);
    const std::vector<TestName> tests = parse_test_list(args.tests);
    if (!(args.level > 0.0 && args.level < 1.0)) throw InputError("--level must lie in (0, 1)");
    const OutputTarget target = resolve_output(args.output, args.format);

    std::string provenance = detail::file_digest(args.input);
    provenance += "|" + args.layout + "|" + args.filter;
    for (const auto& c : args.x_cols) provenance += "|x:" + c;
    for (const auto& c : args.d_cols) provenance += "|d:" + c;
    if (args.no_intercept) provenance += "|no-intercept";
    const std::string hash = fnv1a_hex(provenance);

    const PanelMatrix resid = detail::filter_panel(data, args);
    std::vector<ResultRecord> records;
    for (std::size_t m : ms) {
      current_m = m;
      const FactorModelFit fit = fit_pca(resid, m);
      RandomStream wstream = replication_stream(args.seed, 0, StreamTag::Weights, m);
      const RademacherWeights w = draw_rademacher(resid.n(), wstream);
      const CdStatistics s = compute_all_statistics(fit, w);
      for (TestName t : tests) {
        records.push_back(make_test_record(decide(s.get(t), args.level, t), resid.n(), resid.T(), m,
                                           args.seed, args.filter, s.bias.theta_hat, hash));
      }
    }
    if (target.path.empty()) {
      emit_records(target, records, out);
    } else {
      detail::print_table(out, records);
      emit_records(target, records, out);
    }
  } catch (const SingularUnitDesign& e) {
    err << "error: unit '" << detail::unit_label(data, e.unit()) << "': " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DegenerateUnitScale& e) {
    err << "error: unit '" << detail::unit_label(data, e.unit()) << "': " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NumericalError& e) {
    err << "error";
    if (current_m > 0) err << " (m = " << current_m << ")";
    err << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string grid;
  std::vector<std::size_t> n{100};
  std::vector<std::size_t> T{100};
  std::size_t m0 = 1;
  std::vector<double> alphas;
  std::vector<double> rho{0.0};
  std::string dist = "gaussian";
  std::string m = "1";
  std::size_t reps = 1000;
  std::uint64_t seed = 42;
  double level = 0.05;
  std::vector<std::string> tests;
  bool regressors = false;
  unsigned threads = 0;
  std::string output;  // empty = the grid's output field, else json on standard output
  std::string format;
  bool quiet = false;
};

inline ExperimentSpec experiment_from_args(const SimulateArgs& a) {
  if (!a.grid.empty()) return load_experiment(a.grid);
  ExperimentSpec s;
  s.n = a.n;
  s.T = a.T;
  s.m0 = a.m0;
  s.alphas = {a.alphas.empty() ? std::vector<double>(a.m0, 1.0) : a.alphas};
  s.rho = a.rho;
  s.error_dist = error_dist_from_string(a.dist);
  s.include_regressors = a.regressors;
  s.m_values = parse_m_range(a.m);
  s.replications = a.reps;
  s.master_seed = a.seed;
  s.level = a.level;
  s.tests = parse_test_list(a.tests);
  s.validate();
  return s;
}

/// Runs every cell of a grid and writes one record per cell, m and test.
inline int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentSpec spec = experiment_from_args(args);
    const std::string output =
        !args.output.empty() ? args.output : !spec.output.empty() ? spec.output : "json";
    const OutputTarget target = resolve_output(output, args.format);
    const auto cells = spec.cells();

    std::vector<ResultRecord> records;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const DgpConfig& cfg = cells[k];
      McOptions opts;
      opts.threads = args.threads;
      const std::size_t reps = spec.replications;
      const std::size_t step = std::max<std::size_t>(1, reps / 10);
      if (!args.quiet) {
        opts.progress = [&, k](std::size_t done) {
          if (done % step == 0 || done == reps) {
            err << "\rcell " << k + 1 << "/" << cells.size() << ": " << done << "/" << reps
                << " replications" << std::flush;
          }
        };
      }
      const auto results =
          run_monte_carlo(cfg, spec.m_values, reps, spec.master_seed, spec.level, opts);
      if (!args.quiet) {
        err << "\rcell " << k + 1 << "/" << cells.size() << " (n=" << cfg.n << ", T=" << cfg.T
            << ", rho=" << cfg.rho_spatial << ") done\n";
      }
      for (const auto& res : results) {
        for (TestName t : spec.tests) records.push_back(make_simulation_record(res, t));
      }
    }
    emit_records(target, records, out);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-sectional dependence tests for large panels"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  TestArgs targs;
  auto* test = app.add_subcommand("test", "Test a CSV panel for remaining cross-sectional dependence");
  test->add_option("--input", targs.input, "CSV file with the panel")->required();
  test->add_option("--layout", targs.layout, "wide or long")->capture_default_str();
  test->add_option("--m", targs.m, "factor count: 2, 1:4 or 1,3")->capture_default_str();
  test->add_option("--filter", targs.filter, "demean, ols or cce")->capture_default_str();
  test->add_option("--level", targs.level, "significance level")->capture_default_str();
  test->add_option("--tests", targs.tests, "CD, CD_STAR, CD_W, CD_W_PLUS (default all)")
      ->delimiter(',');
  test->add_option("--seed", targs.seed, "seed for the CD_W weights")->capture_default_str();
  test->add_option("--output", targs.output, "json, csv or a file path")->capture_default_str();
  test->add_option("--format", targs.format, "json or csv, overrides the file extension");
  test->add_option("--x-cols", targs.x_cols, "regressor columns (LONG layout)")->delimiter(',');
  test->add_option("--d-cols", targs.d_cols, "common observed factor columns (LONG layout)")
      ->delimiter(',');
  test->add_option("--unit-col", targs.unit_col, "unit column name (LONG)")->capture_default_str();
  test->add_option("--time-col", targs.time_col, "time column name (LONG)")->capture_default_str();
  test->add_option("--value-col", targs.value_col, "value column name (LONG)")->capture_default_str();
  test->add_flag("--no-intercept", targs.no_intercept, "omit the intercept in the ols filter");

  SimulateArgs sargs;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection frequencies over a grid");
  auto* grid = sim->add_option("--grid", sargs.grid, "JSON experiment grid");
  std::vector<CLI::Option*> inline_opts{
      sim->add_option("--n", sargs.n, "cross-section sizes")->delimiter(','),
      sim->add_option("--T", sargs.T, "time dimensions")->delimiter(','),
      sim->add_option("--m0", sargs.m0, "number of latent factors (1 or 2)"),
      sim->add_option("--alphas", sargs.alphas, "factor strengths, one per factor")->delimiter(','),
      sim->add_option("--rho", sargs.rho, "spatial coefficients")->delimiter(','),
      sim->add_option("--dist", sargs.dist, "gaussian or chi2"),
      sim->add_option("--m", sargs.m, "factors extracted: 2, 1:4 or 1,3"),
      sim->add_option("--reps", sargs.reps, "replications per cell"),
      sim->add_option("--seed", sargs.seed, "master seed"),
      sim->add_option("--level", sargs.level, "significance level"),
      sim->add_option("--tests", sargs.tests, "tests to report (default all)")->delimiter(','),
      sim->add_flag("--regressors", sargs.regressors, "panel regression model with CCE filter"),
  };
  for (auto* o : inline_opts) grid->excludes(o);
  sim->add_option("--threads", sargs.threads, "worker threads (default CDPANEL_THREADS or all)");
  sim->add_option("--output", sargs.output, "json, csv or a file path");
  sim->add_option("--format", sargs.format, "json or csv, overrides the file extension");
  sim->add_flag("--quiet", sargs.quiet, "no progress on standard error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = test->parsed() ? test : sim->parsed() ? sim : &app;
    err << sub->help();
    return kExitInput;
  }
  if (test->parsed()) return cmd_test(targs, out, err);
  return cmd_simulate(sargs, out, err);
}

}  // namespace cdpanel
