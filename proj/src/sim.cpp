#include "edgecache/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "edgecache/errors.hpp"
#include "hashing.hpp"

namespace edgecache {

void SimConfig::validate() const {
  if (M < 1) throw ConfigError("M must be at least 1");
  if (phi < 1) throw ConfigError("phi must be at least 1");
  if (period_length <= 0) throw ConfigError("period length must be positive");
  if (horizon < 0) throw ConfigError("horizon must be non-negative");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (n_neg < 0) throw ConfigError("n_neg must be non-negative");
  hp.validate();
}

namespace {

std::size_t feature_dimension(std::span<const TracePeriod> periods, std::span<const Request> init) {
  for (const auto& p : periods) {
    if (!p.requests.empty()) return p.requests.front().features.size();
  }
  return init.empty() ? 0 : init.front().features.size();
}

OptimalRate optimal_from_counts(int t, std::size_t D, std::vector<std::size_t> counts,
                                std::size_t capacity) {
  OptimalRate rate;
  rate.t = t;
  rate.D = D;
  std::sort(counts.begin(), counts.end(), std::greater<>());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    rate.pairs += counts[i];
    if (i < capacity) rate.top_pairs += counts[i];
  }
  return rate;
}

bool valid_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

std::vector<OptimalRate> optimal_hit_rates(std::span<const TracePeriod> periods,
                                           std::size_t capacity) {
  std::vector<OptimalRate> out;
  for (const auto& p : periods) {
    if (p.requests.empty()) continue;
    const auto stats = compute_period_stats(p);
    std::vector<std::size_t> counts;
    counts.reserve(stats.requesting_users.size());
    for (const auto& [id, n] : stats.requesting_users) counts.push_back(n);
    out.push_back(optimal_from_counts(p.index, stats.requests, std::move(counts), capacity));
  }
  return out;
}

std::vector<RegretPoint> regret(const MetricsReport& metrics, std::span<const OptimalRate> optimal) {
  if (metrics.per_period.size() != optimal.size()) {
    throw ConfigError("regret needs optimal rates for the same periods");
  }
  std::size_t total = 0;
  for (const auto& p : metrics.per_period) total += p.D;
  std::vector<RegretPoint> out;
  if (total == 0) return out;

  std::size_t cum_d = 0, cum_hits = 0;
  double cum_mass = 0.0;
  int next = 1;
  for (std::size_t i = 0; i < metrics.per_period.size() && next <= 10; ++i) {
    const auto& p = metrics.per_period[i];
    if (p.t != optimal[i].t) throw ConfigError("regret needs optimal rates for the same periods");
    cum_d += p.D;
    cum_hits += p.hits;
    cum_mass += optimal[i].hit_mass();
    bool crossed = false;
    while (next <= 10 && cum_d * 10 >= total * static_cast<std::size_t>(next)) {
      crossed = true;
      ++next;
    }
    if (!crossed) continue;
    RegretPoint pt;
    pt.D = cum_d;
    pt.t = p.t;
    pt.H = static_cast<double>(cum_hits) / static_cast<double>(cum_d);
    pt.H_optimal = cum_mass / static_cast<double>(cum_d);
    pt.R = (cum_mass - static_cast<double>(cum_hits)) / static_cast<double>(cum_d);
    out.push_back(pt);
  }
  return out;
}

bool check_lower_bound(std::size_t hits, const OptimalRate& optimal, double delta_p,
                    std::size_t active_users, std::size_t capacity) {
  const double gap = static_cast<double>(capacity) *
                     (delta_p * static_cast<double>(active_users) + 2.0);
  return static_cast<double>(hits) >= optimal.hit_mass() - gap;
}

RunResult run(std::span<const TracePeriod> periods, const SimConfig& config,
              std::span<const Request> init) {
  config.validate();
  if (config.horizon > 0 && periods.size() != static_cast<std::size_t>(config.horizon)) {
    throw ConfigError(fmt::format("expected {} periods, got {}", config.horizon, periods.size()));
  }
  for (const auto& p : periods) {
    if (p.end - p.start != config.period_length) {
      throw ConfigError("trace was bucketed with a different period length");
    }
  }

  RunResult result;
  auto& m = result.metrics;
  m.policy = std::string(policy_name(config.policy));
  m.capacity = config.capacity();

  const auto dimension = feature_dimension(periods, init);
  std::unique_ptr<CachePolicy> policy;
  ProposedPolicy* proposed = nullptr;
  if (dimension > 0) {
    PolicySpec spec;
    spec.kind = config.policy;
    spec.lfu_period_scoped = config.lfu_period_scoped;
    spec.proposed = {dimension, config.hp, config.gamma, config.n_neg, config.seed, config.retrain};
    policy = make_policy(spec, config.capacity());
    proposed = dynamic_cast<ProposedPolicy*>(policy.get());
    if (proposed && !init.empty()) proposed->warm_start(init);
  }

  std::size_t index = 0;
  for (const auto& p : periods) {
    if (p.requests.empty()) continue;
    policy->begin_period(p);
    PeriodMetrics pm;
    pm.t = p.index;
    pm.D = p.requests.size();
    for (const auto& r : p.requests) {
      const auto d = policy->on_request(r);
      if (d.hit) ++pm.hits;
      result.decisions.push_back(
          {index++, p.index, r.user, r.content, r.timestamp, d.hit, d.admitted, d.evicted, d.p_hat});
    }
    const auto stats = compute_period_stats(p);
    pm.U = stats.users;
    pm.F = stats.distinct_contents;
    pm.H = static_cast<double>(pm.hits) / static_cast<double>(pm.D);
    m.per_period.push_back(pm);
  }

  m.optimal = optimal_hit_rates(periods, m.capacity);
  double weighted = 0.0, optimal_mass = 0.0;
  for (std::size_t i = 0; i < m.per_period.size(); ++i) {
    auto& pm = m.per_period[i];
    pm.H_optimal = m.optimal[i].rate();
    m.total_requests += pm.D;
    m.total_hits += pm.hits;
    weighted += pm.H * static_cast<double>(pm.D);
    optimal_mass += m.optimal[i].hit_mass();
  }
  if (m.total_requests > 0) {
    const auto total = static_cast<double>(m.total_requests);
    m.overall_H = static_cast<double>(m.total_hits) / total;
    m.overall_H_weighted = weighted / total;
    m.overall_H_optimal = optimal_mass / total;
  }
  m.regret = regret(m, m.optimal);
  if (proposed) result.learning = proposed->diagnostics();
  return result;
}

double ErrorSeries::cumulative_at(std::size_t d) const {
  auto it = std::upper_bound(D.begin(), D.end(), d);
  if (it == D.begin()) return 0.0;
  return cumulative[static_cast<std::size_t>(it - D.begin()) - 1];
}

double ErrorSeries::mean_at(std::size_t d) const {
  return d == 0 ? 0.0 : cumulative_at(d) / static_cast<double>(d);
}

double loglog_slope(std::span<const std::size_t> x, std::span<const double> y, double lo,
                    double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto xv = static_cast<double>(x[i]);
    if (xv < lo || xv > hi || !(y[i] > 0.0)) continue;
    const double lx = std::log(xv), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  if (denom == 0.0) return 0.0;
  return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

ErrorSeries prediction_error_series(std::span<const DecisionRecord> decisions,
                                    std::span<const PeriodMetrics> periods) {
  std::unordered_map<int, std::size_t> users;
  for (const auto& p : periods) users[p.t] = p.U;

  std::unordered_map<std::pair<int, ContentId>, std::set<UserId>, PairHash> requesters;
  for (const auto& d : decisions) requesters[{d.period, d.content}].insert(d.user);

  ErrorSeries series;
  std::unordered_set<std::pair<int, ContentId>, PairHash> scored;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const auto& d = decisions[i];
    if (!scored.emplace(d.period, d.content).second) continue;
    if (!d.p_hat || !valid_probability(*d.p_hat)) continue;
    const auto u = users.at(d.period);
    const double real = static_cast<double>(requesters.at({d.period, d.content}).size()) /
                        static_cast<double>(u);
    cumulative += std::abs(*d.p_hat - real);
    series.D.push_back(i + 1);
    series.cumulative.push_back(cumulative);
    series.mean.push_back(cumulative / static_cast<double>(i + 1));
  }

  const auto total = decisions.size();
  if (total >= 10) {
    std::vector<std::size_t> xs;
    std::vector<double> ys;
    const double lo = static_cast<double>(total) / 10.0;
    constexpr int kPoints = 50;
    for (int k = 0; k <= kPoints; ++k) {
      const double d = lo * std::pow(10.0, static_cast<double>(k) / kPoints);
      const auto di = std::min<std::size_t>(total, static_cast<std::size_t>(std::llround(d)));
      if (!xs.empty() && xs.back() == di) continue;
      xs.push_back(di);
      ys.push_back(series.cumulative_at(di));
    }
    series.slope = loglog_slope(xs, ys, 0.0, static_cast<double>(total));
  }
  return series;
}

BoundReport compute_bounds(std::span<const PeriodMetrics> periods,
                           std::span<const DecisionRecord> decisions, std::size_t capacity,
                           const std::optional<LearningDiagnostics>& learning) {
  BoundReport report;
  report.capacity = capacity;

  std::map<int, std::vector<const DecisionRecord*>> by_period;
  std::unordered_map<ContentId, std::set<int>> content_periods;
  std::unordered_map<std::pair<UserId, ContentId>, std::size_t, PairHash> pair_counts;
  for (const auto& d : decisions) {
    by_period[d.period].push_back(&d);
    content_periods[d.content].insert(d.period);
    ++pair_counts[{d.user, d.content}];
  }
  for (const auto& [id, ts] : content_periods) {
    if (ts.size() > 1) ++report.spread_contents;
  }
  for (const auto& [pair, n] : pair_counts) {
    if (n > 1) ++report.repeated_pairs;
  }

  MetricsReport metrics;
  metrics.capacity = capacity;
  std::vector<OptimalRate> optimal;
  for (const auto& pm : periods) {
    auto it = by_period.find(pm.t);
    const std::size_t found = it == by_period.end() ? 0 : it->second.size();
    if (found != pm.D) {
      throw InputError(fmt::format("period {}: metrics list {} requests, decision log has {}",
                                   pm.t, pm.D, found));
    }
    if (pm.D == 0) continue;
    if (pm.U == 0) throw InputError(fmt::format("period {} has requests but no active users", pm.t));

    PeriodBound b;
    b.t = pm.t;
    b.D = pm.D;
    b.U = pm.U;

    std::map<ContentId, std::set<UserId>> requesters;
    bool spread = false, repeated = false;
    for (const auto* d : it->second) {
      requesters[d->content].insert(d->user);
      if (d->hit) ++b.hits;
      if (content_periods.at(d->content).size() > 1) spread = true;
      if (pair_counts.at({d->user, d->content}) > 1) repeated = true;
    }
    std::vector<std::size_t> counts;
    for (const auto& [id, us] : requesters) counts.push_back(us.size());
    b.optimal = optimal_from_counts(pm.t, pm.D, std::move(counts), capacity);

    bool invalid = false, predicted = false;
    double delta = 0.0;
    std::set<ContentId> scored;
    for (const auto* d : it->second) {
      if (!scored.insert(d->content).second || !d->p_hat) continue;
      predicted = true;
      if (!valid_probability(*d->p_hat)) {
        invalid = true;
        ++report.invalid_predictions;
        continue;
      }
      const double real = static_cast<double>(requesters.at(d->content).size()) /
                          static_cast<double>(pm.U);
      delta = std::max(delta, std::abs(*d->p_hat - real));
    }

    b.regime_ok = !spread && !repeated;
    if (spread) b.skip_reason = "content requested in more than one period";
    if (repeated) b.skip_reason += std::string(b.skip_reason.empty() ? "" : "; ") + "repeated request";
    if (!b.regime_ok) ++report.regime_violations;

    if (predicted) {
      if (!invalid) b.delta_p = delta;
      b.lower_bound = b.optimal.rate() - static_cast<double>(capacity) *
                                             (delta * static_cast<double>(pm.U) + 2.0) /
                                             static_cast<double>(pm.D);
      if (b.regime_ok || invalid) {
        ++report.lower_bound_checked;
        b.lower_bound_ok = !invalid && check_lower_bound(b.hits, b.optimal, delta, pm.U, capacity);
        if (!*b.lower_bound_ok) ++report.lower_bound_failed;
      }
    } else if (b.skip_reason.empty()) {
      b.skip_reason = "no popularity predictions recorded";
    }

    report.U_min = report.U_min == 0 ? pm.U : std::min(report.U_min, pm.U);
    report.U_max = std::max(report.U_max, pm.U);

    PeriodMetrics row = pm;
    row.hits = b.hits;
    metrics.per_period.push_back(row);
    optimal.push_back(b.optimal);
    report.periods.push_back(std::move(b));
  }

  std::size_t total = 0;
  for (const auto& p : metrics.per_period) total += p.D;
  report.errors = prediction_error_series(decisions, periods);
  report.regret = regret(metrics, optimal);
  if (learning) {
    report.W = learning->weight_diameter;
    report.G = learning->max_gradient_norm;
    report.tau = learning->residual_loss;
  }
  if (total > 0 && report.U_min > 0) {
    const double ratio = static_cast<double>(report.U_max) / static_cast<double>(report.U_min);
    const double core = report.W * report.G * std::sqrt(2.0 * static_cast<double>(total)) + report.tau;
    report.cumulative_error = report.errors.cumulative.empty() ? 0.0 : report.errors.cumulative.back();
    report.error_bound = ratio * core;
    report.error_bound_ok = report.cumulative_error <= report.error_bound;
    const double T = static_cast<double>(metrics.per_period.size());
    const double umax = static_cast<double>(report.U_max);
    report.regret_bound =
        umax * static_cast<double>(capacity) * (ratio * core + 2.0 * T / umax) /
        static_cast<double>(total);
  }
  if (!report.regret.empty()) {
    report.final_regret = report.regret.back().R;
    report.regret_decreasing = report.regret.back().R < report.regret.front().R;
  }
  return report;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsReport> reports) {
  out << "policy,capacity,t,D_t,U_t,F_t,hits,H_t,H_t_optimal\n";
  for (const auto& r : reports) {
    for (const auto& p : r.per_period) {
      out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.policy, r.capacity, p.t, p.D, p.U, p.F,
                         p.hits, p.H, p.H_optimal);
    }
  }
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  csv::Reader reader(path);
  const auto c_policy = reader.require("policy");
  const auto c_cap = reader.require("capacity");
  const auto c_t = reader.require("t");
  const auto c_d = reader.require("D_t");
  const auto c_u = reader.require("U_t");
  const auto c_f = reader.require("F_t");
  const auto c_hits = reader.require("hits");
  const auto c_h = reader.require("H_t");
  const auto c_ho = reader.require("H_t_optimal");
  std::vector<MetricsRow> out;
  while (reader.next()) {
    const auto line = reader.line();
    MetricsRow row;
    row.policy = reader.field(c_policy);
    row.capacity = csv::parse_number<std::size_t>(reader.field(c_cap), line, "capacity");
    auto& p = row.period;
    p.t = csv::parse_number<int>(reader.field(c_t), line, "t");
    p.D = csv::parse_number<std::size_t>(reader.field(c_d), line, "D_t");
    p.U = csv::parse_number<std::size_t>(reader.field(c_u), line, "U_t");
    p.F = csv::parse_number<std::size_t>(reader.field(c_f), line, "F_t");
    p.hits = csv::parse_number<std::size_t>(reader.field(c_hits), line, "hits");
    p.H = csv::parse_number<double>(reader.field(c_h), line, "H_t");
    p.H_optimal = csv::parse_number<double>(reader.field(c_ho), line, "H_t_optimal");
    out.push_back(std::move(row));
  }
  return out;
}

namespace {

nlohmann::json regret_json(std::span<const RegretPoint> points) {
  auto arr = nlohmann::json::array();
  for (const auto& p : points) {
    arr.push_back({{"D", p.D}, {"t", p.t}, {"H", p.H}, {"H_optimal", p.H_optimal}, {"R", p.R}});
  }
  return arr;
}

nlohmann::json bounds_json(const BoundReport& b) {
  auto periods = nlohmann::json::array();
  for (const auto& p : b.periods) {
    nlohmann::json row = {{"t", p.t},
                          {"D", p.D},
                          {"U", p.U},
                          {"hits", p.hits},
                          {"H_optimal", p.optimal.rate()},
                          {"regime_ok", p.regime_ok},
                          {"lower_bound", p.lower_bound}};
    row["delta_p"] = p.delta_p ? nlohmann::json(*p.delta_p) : nlohmann::json(nullptr);
    row["lower_bound_ok"] = p.lower_bound_ok ? nlohmann::json(*p.lower_bound_ok) : nlohmann::json(nullptr);
    if (!p.skip_reason.empty()) row["skip_reason"] = p.skip_reason;
    periods.push_back(std::move(row));
  }
  return {
      {"capacity", b.capacity},
      {"passed", b.passed()},
      {"lower_bound",
       {{"checked", b.lower_bound_checked},
        {"failed", b.lower_bound_failed},
        {"regime_violations", b.regime_violations},
        {"spread_contents", b.spread_contents},
        {"repeated_pairs", b.repeated_pairs},
        {"invalid_predictions", b.invalid_predictions}}},
      {"error_bound",
       {{"cumulative_error", b.cumulative_error},
        {"bound", b.error_bound},
        {"ok", b.error_bound_ok},
        {"slope", b.errors.slope}}},
      {"regret_bound",
       {{"final_regret", b.final_regret},
        {"bound", b.regret_bound},
        {"regret_decreasing", b.regret_decreasing}}},
      {"empirical", {{"U_min", b.U_min}, {"U_max", b.U_max}, {"W", b.W}, {"G", b.G}, {"tau", b.tau}}},
      {"regret", regret_json(b.regret)},
      {"periods", std::move(periods)},
  };
}

}  // namespace

std::string summary_json(std::span<const RunResult> results, std::span<const BoundReport> bounds) {
  auto runs = nlohmann::json::array();
  for (const auto& r : results) {
    const auto& m = r.metrics;
    nlohmann::json row = {{"policy", m.policy},
                          {"capacity", m.capacity},
                          {"total_requests", m.total_requests},
                          {"total_hits", m.total_hits},
                          {"periods", m.per_period.size()},
                          {"overall_H", m.overall_H},
                          {"overall_H_weighted", m.overall_H_weighted},
                          {"overall_H_optimal", m.overall_H_optimal},
                          {"regret", regret_json(m.regret)}};
    if (r.learning) {
      row["learning"] = {{"samples", r.learning->samples},
                         {"retrains", r.learning->retrains},
                         {"W", r.learning->weight_diameter},
                         {"G", r.learning->max_gradient_norm},
                         {"tau", r.learning->residual_loss}};
    }
    runs.push_back(std::move(row));
  }
  nlohmann::json doc = {{"runs", std::move(runs)}};
  if (!bounds.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& b : bounds) arr.push_back(bounds_json(b));
    doc["bounds"] = std::move(arr);
  }
  return doc.dump(2) + "\n";
}

std::string bound_report_json(const BoundReport& report) {
  return bounds_json(report).dump(2) + "\n";
}

}  // namespace edgecache
