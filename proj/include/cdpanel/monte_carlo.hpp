#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cdpanel/cce.hpp"
#include "cdpanel/cd_tests.hpp"
#include "cdpanel/dgp.hpp"
#include "cdpanel/factor_estimation.hpp"
#include "cdpanel/panel.hpp"
#include "cdpanel/rng.hpp"

namespace cdpanel {

/// Purpose tags mixed into stream keys so that each use gets its own stream.
enum class StreamTag : std::uint64_t {
  Intercepts = 0x1a7e5c3d,
  Panel = 0x2b8f6d4e,
  Weights = 0x3c907e5f,
};

inline RandomStream replication_stream(std::uint64_t master_seed, std::uint64_t r, StreamTag tag,
                                       std::uint64_t sub = 0) {
  return RandomStream{master_seed, static_cast<std::uint64_t>(tag), r, sub};
}

struct TestSummary {
  TestName test = TestName::CD;
  std::size_t rejections = 0;
  double rejection_rate = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

struct McResult {
  DgpConfig config;
  std::size_t m_used = 1;
  std::size_t requested = 0;     // replications asked for
  std::size_t replications = 0;  // replications that completed
  std::size_t failures = 0;      // replications with a numerical failure
  std::uint64_t master_seed = 0;
  double level = 0.05;
  std::array<TestSummary, 4> tests{};
  double mean_theta_hat = 0.0;

  const TestSummary& summary(TestName t) const { return tests[static_cast<std::size_t>(t)]; }
};

/// Worker count: CDPANEL_THREADS if set and positive, else hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("CDPANEL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs body(index) for index in [0, count) over `threads` workers.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= count) return;
        try {
          body(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct McOptions {
  unsigned threads = 0;  // 0 = default_thread_count()
  CdOptions cd;
  /// Called after each finished replication with the number done so far.
  std::function<void(std::size_t)> progress;
};

namespace detail {

struct ReplicationOutcome {
  bool ok = false;
  std::array<double, 4> stats{};
  double theta_hat = 0.0;
};

inline PanelMatrix filtered_residuals(const DgpConfig& cfg, const GeneratedPanel& g) {
  if (!cfg.include_regressors) return demean_units(g.y);
  RegressionDesign design{g.y, g.X, g.D};
  return cce_fit(design).vhat;
}

}  // namespace detail

/// Simulates one experiment cell and evaluates every m in m_values on the same panels.
///
/// Replication r uses streams keyed by (master_seed, r); intercepts are drawn once
/// per cell from a stream keyed by master_seed alone. Aggregation runs in
/// replication order after all work finishes, so results do not depend on the
/// thread count or scheduling.
inline std::vector<McResult> run_monte_carlo(const DgpConfig& config,
                                             const std::vector<std::size_t>& m_values,
                                             std::size_t replications, std::uint64_t master_seed,
                                             double level, const McOptions& options = {}) {
  config.validate();
  if (replications < 1) throw InputError("need at least one replication");
  if (m_values.empty()) throw InputError("need at least one value of m");
  for (std::size_t m : m_values) {
    if (m < 1 || m + 1 > std::min(config.n, config.T)) {
      throw InputError("m=" + std::to_string(m) + " outside [1, min(n, T) - 1]");
    }
  }
  if (!(level > 0.0 && level < 1.0)) throw InputError("significance level must lie in (0, 1)");

  RandomStream intercept_stream = replication_stream(master_seed, 0, StreamTag::Intercepts);
  const Vector intercepts =
      draw_intercepts(config.n, config.intercept_mean, config.intercept_var, intercept_stream);

  std::optional<SpatialSystem> spatial;
  if (config.rho_spatial != 0.0) spatial.emplace(build_spatial_weights(config.n), config.rho_spatial);

  const std::size_t M = m_values.size();
  std::vector<detail::ReplicationOutcome> outcomes(replications * M);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;

  auto body = [&](std::size_t r) {
    RandomStream panel_stream = replication_stream(master_seed, r, StreamTag::Panel);
    const GeneratedPanel g =
        gen_panel(config, intercepts, panel_stream, spatial ? &*spatial : nullptr);
    std::optional<PanelMatrix> v;
    try {
      v = detail::filtered_residuals(config, g);
    } catch (const NumericalError&) {
      v.reset();
    }
    for (std::size_t k = 0; k < M; ++k) {
      auto& out = outcomes[r * M + k];
      if (!v) continue;
      try {
        const FactorModelFit fit = fit_pca(*v, m_values[k]);
        RandomStream wstream = replication_stream(master_seed, r, StreamTag::Weights, m_values[k]);
        const RademacherWeights w = draw_rademacher(config.n, wstream);
        const CdStatistics s = compute_all_statistics(fit, w, options.cd);
        for (TestName t : kAllTests) out.stats[static_cast<std::size_t>(t)] = s.get(t);
        out.theta_hat = s.bias.theta_hat;
        out.ok = true;
      } catch (const NumericalError&) {
        out.ok = false;
      }
    }
    const std::size_t finished = done.fetch_add(1) + 1;
    if (options.progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      options.progress(finished);
    }
  };
  parallel_for(replications, options.threads == 0 ? default_thread_count() : options.threads, body);

  std::vector<McResult> results;
  results.reserve(M);
  for (std::size_t k = 0; k < M; ++k) {
    McResult res;
    res.config = config;
    res.m_used = m_values[k];
    res.requested = replications;
    res.master_seed = master_seed;
    res.level = level;
    std::array<double, 4> sum{}, sumsq{};
    double theta_sum = 0.0;
    for (std::size_t r = 0; r < replications; ++r) {
      const auto& out = outcomes[r * M + k];
      if (!out.ok) {
        ++res.failures;
        continue;
      }
      ++res.replications;
      theta_sum += out.theta_hat;
      for (TestName t : kAllTests) {
        const auto j = static_cast<std::size_t>(t);
        const double x = out.stats[j];
        sum[j] += x;
        sumsq[j] += x * x;
        if (two_sided_p_value(x) < level) ++res.tests[j].rejections;
      }
    }
    const double R = static_cast<double>(res.replications);
    for (TestName t : kAllTests) {
      const auto j = static_cast<std::size_t>(t);
      auto& ts = res.tests[j];
      ts.test = t;
      if (res.replications == 0) continue;
      ts.rejection_rate = static_cast<double>(ts.rejections) / R;
      ts.mean = sum[j] / R;
      ts.sd = res.replications > 1
                  ? std::sqrt(std::max(0.0, (sumsq[j] - R * ts.mean * ts.mean) / (R - 1.0)))
                  : 0.0;
    }
    res.mean_theta_hat = res.replications > 0 ? theta_sum / R : 0.0;
    results.push_back(res);
  }
  return results;
}

inline McResult run_monte_carlo(const DgpConfig& config, std::size_t m_used,
                                std::size_t replications, std::uint64_t master_seed, double level,
                                const McOptions& options = {}) {
  return run_monte_carlo(config, std::vector<std::size_t>{m_used}, replications, master_seed, level,
                         options)
      .front();
}

}  // namespace cdpanel
