// Runs the ten acceptance criteria and prints one PASS/FAIL line each.
// Usage: edgecache_acceptance [data_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/core.h>

#include "cli.hpp"
#include "edgecache/cache.hpp"
#include "edgecache/popularity.hpp"
#include "edgecache/preference.hpp"
#include "edgecache/sim.hpp"
#include "experiment.hpp"
#include "oracles.hpp"

using namespace edgecache;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Every run made here is checked for criterion 9 at the end.
std::vector<MetricsReport> g_reports;

void keep(const std::vector<RunResult>& results) {
  for (const auto& r : results) g_reports.push_back(r.metrics);
}

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uw(-2.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    PreferenceModel m(21);
    for (auto& w : m.w) w = uw(rng);
    const auto x = oracle::random_features(rng, 21, 0.6);
    const int y = static_cast<int>(rng() % 2);
    const auto g = gradient(m, x, y);
    const auto fd = oracle::numeric_gradient(m, x, y, 1e-6);
    double num = 0, den = 0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      num += (g[n] - fd[n]) * (g[n] - fd[n]);
      den += g[n] * g[n];
    }
    if (den > 0) worst = std::max(worst, std::sqrt(num / den));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 1.0,
          fmt::format("max relative error {:.3g}, {:.3f} s", worst, secs)};
}

Outcome ftrl_ogd_equivalence() {
  const Hyperparams hp{0.1, 1.0, 0.0, 0.0};
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    PreferenceModel ftrl(21, hp), ogd(21, hp);
    for (std::size_t k = 1; k <= 1000; ++k) {
      const Sample s{FeatureVector(oracle::random_features(rng, 21)), static_cast<int>(rng() % 2)};
      ftrl_update(ftrl, s);
      ogd_update(ogd, s, k);
      for (std::size_t n = 0; n < 21; ++n) worst = std::max(worst, std::abs(ftrl.w[n] - ogd.w[n]));
    }
  }
  return {worst <= 1e-9, fmt::format("max coordinate gap {:.3g} over 20 seeds x 1000 samples", worst)};
}

Outcome closed_form() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Hyperparams hp{0.05 + 0.95 * u(rng), 0.5 + 1.5 * u(rng), 2.0 * u(rng), u(rng)};
    const double z = -6.0 + 12.0 * u(rng);
    const double q = 20.0 * u(rng);
    const double a = hp.lambda2 + (hp.beta + std::sqrt(q)) / hp.alpha;
    worst = std::max(worst, std::abs(proximal_weight(z, q, hp) - oracle::grid_minimize(z, hp.lambda1, a)));
  }
  return {worst <= 1e-6, fmt::format("max gap to grid minimizer {:.3g}", worst)};
}

Outcome eviction_oracle() {
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> up(0.0, 1.0);
    const std::size_t cap = 1 + rng() % 50;
    CacheState cache(cap);
    UserHistories hist;
    for (int op = 0; op < 10000; ++op) {
      const auto id = ContentId{static_cast<std::int64_t>(rng() % 200)};
      const auto user = UserId{static_cast<std::int64_t>(rng() % 20)};
      const std::size_t users = 1 + rng() % 10;
      if (cache.lookup(id)) {
        cache.on_hit(id, users, user, hist);
      } else {
        // Coarse probabilities and timestamps force ties on the first two keys.
        const double p = std::round(up(rng) * 20) / 20;
        cache.admit_or_reject(id, p, static_cast<Timestamp>(rng() % 100), users);
      }
      if (cache.peek_least() != oracle::brute_least(cache.entries())) ++mismatches;
    }
  }
  return {mismatches == 0, fmt::format("{} mismatches over 10 x 10^4 operations", mismatches)};
}

struct Planted {
  cli::ExperimentSpec spec;
  cli::PreparedTrace prepared;
};

Planted load_planted(const fs::path& config) {
  Planted p{cli::ExperimentSpec::load(config), {}};
  p.spec.validate();
  p.prepared = cli::prepare(p.spec);
  return p;
}

Outcome lower_bound_check(const Planted& world, RunResult& proposed) {
  const auto t0 = Clock::now();
  auto results = cli::run_jobs(world.spec, world.prepared,
                               {{PolicyKind::Proposed, world.spec.sim.capacity()}});
  keep(results);
  proposed = results.front();
  const auto report = compute_bounds(proposed.metrics.per_period, proposed.decisions,
                                     proposed.metrics.capacity, proposed.learning);
  const double secs = seconds_since(t0);
  const bool ok = world.prepared.periods.size() == 200 && report.regime_violations == 0 &&
                  report.lower_bound_checked == 200 && report.lower_bound_failed == 0 &&
                  report.invalid_predictions == 0 && secs < 120.0;
  return {ok, fmt::format("{} periods checked, {} failed, {} regime violations, {:.1f} s",
                          report.lower_bound_checked, report.lower_bound_failed,
                          report.regime_violations, secs)};
}

Outcome sublinear_error(const RunResult& proposed) {
  const auto series = prediction_error_series(proposed.decisions, proposed.metrics.per_period);
  const auto total = proposed.decisions.size();
  if (total < 100000) return {false, fmt::format("trace has only {} requests", total)};
  std::vector<std::size_t> xs;
  std::vector<double> ys;
  for (int k = 0; k <= 50; ++k) {
    xs.push_back(static_cast<std::size_t>(std::llround(1e4 * std::pow(10.0, k / 50.0))));
    ys.push_back(series.cumulative_at(xs.back()));
  }
  const double slope = loglog_slope(xs, ys, 1e4, 1e5);
  const double early = series.mean_at(1000);
  const double late = series.mean_at(100000);
  return {slope <= 0.8 && late < 0.5 * early,
          fmt::format("slope over [1e4, 1e5] {:.3f}, mean error {:.4f} at 1e3 -> {:.4f} at 1e5",
                      slope, early, late)};
}

Outcome regret_decay(const RunResult& proposed) {
  const auto& r = proposed.metrics.regret;
  if (r.empty()) return {false, "no regret checkpoints"};
  const bool ok = proposed.metrics.total_requests >= 100000 && r.back().R < 0.5 * r.front().R;
  return {ok, fmt::format("D = {}, R {:.4f} at D = {} -> {:.4f} at D = {}",
                          proposed.metrics.total_requests, r.front().R, r.front().D, r.back().R,
                          r.back().D)};
}

Outcome baseline_ordering(const Planted& world) {
  const std::vector<std::size_t> caps{60, 600, 1800};
  const std::vector<PolicyKind> kinds{PolicyKind::Proposed, PolicyKind::Fifo, PolicyKind::Lru,
                                      PolicyKind::Lfu};
  std::vector<cli::Job> jobs;
  for (auto c : caps) {
    for (auto k : kinds) jobs.push_back({k, c});
  }
  auto spec = world.spec;
  spec.jobs = 4;
  const auto results = cli::run_jobs(spec, world.prepared, jobs);
  keep(results);

  bool ok = true;
  std::string detail;
  const auto hits = [&](std::size_t ci, std::size_t ki) {
    return results[ci * kinds.size() + ki].metrics.total_hits;
  };
  for (std::size_t ci = 0; ci < caps.size(); ++ci) {
    const auto& p = results[ci * kinds.size()].metrics;
    detail += fmt::format("{}{}: PROPOSED {:.4f}", ci ? "; " : "", caps[ci], p.overall_H);
    for (std::size_t ki = 1; ki < kinds.size(); ++ki) {
      ok = ok && hits(ci, 0) > hits(ci, ki);
      detail += fmt::format(" {} {:.4f}", policy_name(kinds[ki]),
                            results[ci * kinds.size() + ki].metrics.overall_H);
    }
  }
  for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
    for (std::size_t ci = 1; ci < caps.size(); ++ci) {
      if (hits(ci, ki) < hits(ci - 1, ki)) {
        ok = false;
        detail += fmt::format("; {} drops from {} to {}", policy_name(kinds[ki]), caps[ci - 1],
                              caps[ci]);
      }
    }
  }
  return {ok, detail};
}

Outcome overall_consistency(const Planted& concentrated) {
  // A few more runs so OPTIMAL and the remaining capacities are covered too.
  std::vector<cli::Job> jobs;
  for (auto k : {PolicyKind::Optimal, PolicyKind::Fifo, PolicyKind::Lru, PolicyKind::Lfu}) {
    for (std::size_t c : {3u, 21u, 300u}) jobs.push_back({k, c});
  }
  auto spec = concentrated.spec;
  spec.jobs = 4;
  keep(cli::run_jobs(spec, concentrated.prepared, jobs));

  double worst = 0.0;
  for (const auto& m : g_reports) worst = std::max(worst, std::abs(m.overall_H - m.overall_H_weighted));
  return {worst <= 1e-12, fmt::format("{} runs, max gap {:.3g}", g_reports.size(), worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& config) {
  const auto base = fs::temp_directory_path() / fmt::format("edgecache_acceptance_{}", ::getpid());
  std::vector<std::string> files[2];
  for (int i = 0; i < 2; ++i) {
    const auto dir = base / fmt::format("run{}", i);
    std::ostringstream out, err;
    const int code = cli::main({"run", "--config", config.string(), "--seed", "7", "--out-dir",
                                dir.string(), "--policy", "PROPOSED", "--policy", "LRU"},
                               out, err);
    if (code != 0) {
      fs::remove_all(base);
      return {false, fmt::format("run {} exited {}: {}", i + 1, code, err.str())};
    }
    files[i] = {slurp(dir / "metrics.csv"), slurp(dir / "summary.json")};
  }
  fs::remove_all(base);
  const bool ok = !files[0][0].empty() && !files[0][1].empty() && files[0] == files[1];
  return {ok, fmt::format("metrics.csv {} bytes, summary.json {} bytes, {}", files[0][0].size(),
                          files[0][1].size(), ok ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path data = argc > 1 ? fs::path(argv[1]) : fs::path(EDGECACHE_DATA_DIR);
  const auto concentrated_cfg = data / "planted_concentrated.json";
  const auto spread_cfg = data / "planted_spread.json";

  int failures = 0;
  const auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    if (!o.pass) ++failures;
    fmt::print("{} {:2} {}: {}\n", o.pass ? "PASS" : "FAIL", n, name, o.detail);
    std::fflush(stdout);
  };

  report(1, "gradient oracle", gradient_oracle);
  report(2, "FTRL/OGD equivalence", ftrl_ogd_equivalence);
  report(3, "closed-form optimality", closed_form);
  report(4, "eviction oracle", eviction_oracle);

  std::optional<Planted> concentrated;
  std::optional<Planted> spread;
  RunResult proposed;
  report(5, "lower bound per period", [&] {
    concentrated = load_planted(concentrated_cfg);
    return lower_bound_check(*concentrated, proposed);
  });
  report(6, "sub-linear prediction error", [&] {
    if (proposed.decisions.empty()) return Outcome{false, "no planted run"};
    return sublinear_error(proposed);
  });
  report(7, "regret decay", [&] {
    if (proposed.decisions.empty()) return Outcome{false, "no planted run"};
    return regret_decay(proposed);
  });
  report(8, "baseline ordering", [&] {
    spread = load_planted(spread_cfg);
    return baseline_ordering(*spread);
  });
  report(9, "overall hit rate consistency", [&] {
    if (!concentrated) return Outcome{false, "no planted trace"};
    return overall_consistency(*concentrated);
  });
  report(10, "determinism", [&] { return determinism(concentrated_cfg); });

  fmt::print("{} of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
