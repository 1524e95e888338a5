#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgecache/policies.hpp"
#include "edgecache/preference.hpp"
#include "edgecache/trace.hpp"

namespace edgecache {

struct SimConfig {
  int M = 3;
  int phi = 20;
  Timestamp period_length = 3600;
  /// Expected number of periods; 0 accepts whatever is passed to run().
  int horizon = 0;
  double gamma = 0.2;
  Hyperparams hp;
  int n_neg = 1;
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::Proposed;
  bool lfu_period_scoped = false;
  RetrainMode retrain = RetrainMode::WarmStart;

  std::size_t capacity() const noexcept {
    return static_cast<std::size_t>(M) * static_cast<std::size_t>(phi);
  }
  /// Throws ConfigError on the first violated constraint.
  void validate() const;
};

struct PeriodMetrics {
  int t = 0;
  std::size_t D = 0;
  std::size_t U = 0;
  std::size_t F = 0;
  std::size_t hits = 0;
  double H = 0.0;
  double H_optimal = 0.0;
};

/// Clairvoyant per-period rate: the share of distinct (user, content) pairs
/// that fall on the period's top-capacity contents.
struct OptimalRate {
  int t = 0;
  std::size_t D = 0;
  std::size_t top_pairs = 0;
  std::size_t pairs = 0;

  double rate() const noexcept {
    return pairs == 0 ? 0.0 : static_cast<double>(top_pairs) / static_cast<double>(pairs);
  }
  /// rate() * D, exact whenever pairs == D.
  double hit_mass() const noexcept {
    return pairs == 0 ? 0.0
                      : static_cast<double>(top_pairs * D) / static_cast<double>(pairs);
  }
};

struct RegretPoint {
  std::size_t D = 0;
  int t = 0;
  double H = 0.0;
  double H_optimal = 0.0;
  double R = 0.0;
};

struct MetricsReport {
  std::string policy;
  std::size_t capacity = 0;
  /// Non-empty periods only.
  std::vector<PeriodMetrics> per_period;
  std::size_t total_requests = 0;
  std::size_t total_hits = 0;
  /// Total hits over total requests.
  double overall_H = 0.0;
  /// Request-weighted mean of the per-period rates.
  double overall_H_weighted = 0.0;
  double overall_H_optimal = 0.0;
  std::vector<OptimalRate> optimal;
  std::vector<RegretPoint> regret;
};

struct RunResult {
  MetricsReport metrics;
  std::vector<DecisionRecord> decisions;
  std::optional<LearningDiagnostics> learning;
};

/// Runs one policy over bucketed periods. `init` seeds the proposed policy's
/// models and histories and is ignored by the other policies.
RunResult run(std::span<const TracePeriod> periods, const SimConfig& config,
              std::span<const Request> init = {});

/// Per non-empty period.
std::vector<OptimalRate> optimal_hit_rates(std::span<const TracePeriod> periods,
                                           std::size_t capacity);

/// Regret against the clairvoyant rates at every 10% of the total requests,
/// evaluated at the end of the period that crosses each mark.
std::vector<RegretPoint> regret(const MetricsReport& metrics, std::span<const OptimalRate> optimal);

/// hits >= H*_t D_t - capacity (dP U_t + 2), compared without tolerance.
bool check_lower_bound(std::size_t hits, const OptimalRate& optimal, double delta_p,
                    std::size_t active_users, std::size_t capacity);

struct ErrorSeries {
  /// Cumulative request count at every scored request.
  std::vector<std::size_t> D;
  std::vector<double> cumulative;
  /// cumulative / D.
  std::vector<double> mean;
  /// Least-squares log-log slope of cumulative error over the final decade.
  double slope = 0.0;

  double cumulative_at(std::size_t d) const;
  double mean_at(std::size_t d) const;
};

/// Scores |p_hat - P| at the first request of each content within a period,
/// where P is the content's distinct requesting users over U_t.
ErrorSeries prediction_error_series(std::span<const DecisionRecord> decisions,
                                    std::span<const PeriodMetrics> periods);

/// Least-squares slope of log y against log x over points with x in [lo, hi].
double loglog_slope(std::span<const std::size_t> x, std::span<const double> y, double lo,
                    double hi);

struct PeriodBound {
  int t = 0;
  std::size_t D = 0;
  std::size_t U = 0;
  std::size_t hits = 0;
  OptimalRate optimal;
  std::optional<double> delta_p;
  bool regime_ok = true;
  std::string skip_reason;
  std::optional<bool> lower_bound_ok;
  double lower_bound = 0.0;
};

struct BoundReport {
  std::size_t capacity = 0;
  std::vector<PeriodBound> periods;
  std::size_t regime_violations = 0;
  std::size_t spread_contents = 0;
  std::size_t repeated_pairs = 0;
  std::size_t invalid_predictions = 0;
  std::size_t lower_bound_checked = 0;
  std::size_t lower_bound_failed = 0;

  std::size_t U_min = 0;
  std::size_t U_max = 0;
  double W = 0.0;
  double G = 0.0;
  double tau = 0.0;
  double cumulative_error = 0.0;
  double error_bound = 0.0;
  bool error_bound_ok = true;
  double final_regret = 0.0;
  double regret_bound = 0.0;
  bool regret_decreasing = false;
  ErrorSeries errors;
  std::vector<RegretPoint> regret;

  /// False iff a regime-compliant period failed or a prediction was invalid.
  bool passed() const noexcept { return lower_bound_failed == 0 && invalid_predictions == 0; }
};

/// Pure function of a run's exported per-period metrics and decision log.
BoundReport compute_bounds(std::span<const PeriodMetrics> periods,
                           std::span<const DecisionRecord> decisions, std::size_t capacity,
                           const std::optional<LearningDiagnostics>& learning = std::nullopt);

/// CSV: policy,capacity,t,D_t,U_t,F_t,hits,H_t,H_t_optimal.
void write_metrics_csv(std::ostream& out, std::span<const MetricsReport> reports);

struct MetricsRow {
  std::string policy;
  std::size_t capacity = 0;
  PeriodMetrics period;
};
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

/// Pretty-printed JSON with overall rates, regret series and learning statistics.
std::string summary_json(std::span<const RunResult> results,
                         std::span<const BoundReport> bounds = {});
std::string bound_report_json(const BoundReport& report);

}  // namespace edgecache
