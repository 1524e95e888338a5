#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "edgecache/errors.hpp"
#include "edgecache/logging.hpp"
#include "experiment.hpp"

namespace edgecache::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::size_t> kSweepCapacities = {60, 600, 1800, 2400, 4800};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out_dir;
  std::vector<std::string> policies;
  std::vector<std::size_t> capacities;
  // ingest / run
  std::string ratings, movies, trace, out;
  std::optional<std::size_t> user_count;
  // bounds
  std::string run_dir;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--seed", f.seed, "Seed for every random draw");
  cmd->add_option("--jobs", f.jobs, "Concurrent simulation runs");
  cmd->add_option("--out-dir", f.out_dir, "Output directory");
  cmd->add_option("--policy", f.policies, "FIFO, LRU, LFU, OPTIMAL or PROPOSED (repeatable)");
  cmd->add_option("--capacity", f.capacities, "Total cache capacity M*phi (repeatable)");
}

/// Config file first, then flags on top.
ExperimentSpec resolve(const Flags& f) {
  auto spec = f.config.empty() ? ExperimentSpec{} : ExperimentSpec::load(f.config);
  if (f.seed) spec.seed = *f.seed;
  if (f.jobs) spec.jobs = *f.jobs;
  if (f.out_dir) spec.out_dir = *f.out_dir;
  if (!f.policies.empty()) {
    spec.policies.clear();
    for (const auto& p : f.policies) spec.policies.push_back(parse_policy(p));
  }
  if (!f.capacities.empty()) spec.capacities = f.capacities;
  if (!f.trace.empty()) {
    spec.synth.reset();
    spec.trace.ratings.reset();
    spec.trace.movies.reset();
    spec.trace.normalized = f.trace;
  }
  if (!f.ratings.empty() || !f.movies.empty()) {
    spec.synth.reset();
    spec.trace.normalized.reset();
    spec.trace.ratings = f.ratings;
    spec.trace.movies = f.movies;
  }
  if (f.user_count) spec.trace.user_count = f.user_count;
  spec.validate();
  return spec;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void print_summary(std::ostream& out, const Trace& trace) {
  Timestamp lo = 0, hi = 0;
  if (!trace.requests.empty()) {
    lo = trace.requests.front().timestamp;
    hi = trace.requests.back().timestamp;
  }
  out << fmt::format("requests: {}\nusers: {}\ncontents: {}\ntime range: {} .. {}\nwarnings: {}\n",
                     trace.requests.size(), trace.user_count(), trace.content_count(), lo, hi,
                     trace.warnings.size());
}

int cmd_ingest(const Flags& f, std::ostream& out) {
  const auto spec = resolve(f);
  const auto prepared = prepare(spec);
  print_summary(out, prepared.trace);
  const fs::path path = f.out.empty() ? spec.out_dir / "trace.csv" : fs::path(f.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_normalized_trace(prepared.trace, path);
  out << fmt::format("normalized trace: {}\n", path.string());
  return kOk;
}

int cmd_synth(const Flags& f, std::ostream& out) {
  auto spec = resolve(f);
  if (!spec.synth) spec.synth = SynthParams{};
  auto params = *spec.synth;
  params.seed = spec.seed;
  const auto result = generate(params);
  write_movielens(result, spec.out_dir);
  write_normalized_trace(result.trace, spec.out_dir / "trace.csv");

  nlohmann::json world = {{"seed", spec.seed}, {"params", synth_to_json(params)},
                          {"true_weights", result.world.true_weights},
                          {"init_requests", result.init_requests}};
  open_out(spec.out_dir / "world.json") << world.dump(2) << "\n";
  print_summary(out, result.trace);
  out << fmt::format("written to {}\n", spec.out_dir.string());
  return kOk;
}

std::vector<BoundReport> bounds_for(const std::vector<Job>& jobs,
                                    const std::vector<RunResult>& results) {
  std::vector<BoundReport> out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].policy != PolicyKind::Proposed) continue;
    const auto& r = results[i];
    out.push_back(compute_bounds(r.metrics.per_period, r.decisions, jobs[i].capacity, r.learning));
  }
  return out;
}

int cmd_simulate(const Flags& f, std::ostream& out, bool sweep) {
  auto spec = resolve(f);
  if (sweep && spec.capacities.empty()) {
    spec.capacities = kSweepCapacities;
    spec.validate();
  }
  if (sweep && spec.policies.empty()) {
    spec.policies = {PolicyKind::Fifo, PolicyKind::Lru, PolicyKind::Lfu, PolicyKind::Optimal,
                     PolicyKind::Proposed};
  }
  const auto prepared = prepare(spec);
  const auto jobs = jobs_of(spec);
  const auto results = run_jobs(spec, prepared, jobs);
  const auto bounds = bounds_for(jobs, results);

  fs::create_directories(spec.out_dir);
  std::vector<MetricsReport> reports;
  for (const auto& r : results) reports.push_back(r.metrics);
  {
    auto m = open_out(spec.out_dir / "metrics.csv");
    write_metrics_csv(m, reports);
  }
  open_out(spec.out_dir / "summary.json") << summary_json(results, bounds);
  if (sweep) {
    auto s = open_out(spec.out_dir / "sweep.csv");
    s << "policy,capacity,total_requests,total_hits,overall_H,overall_H_optimal\n";
    for (const auto& m : reports) {
      s << fmt::format("{},{},{},{},{},{}\n", m.policy, m.capacity, m.total_requests, m.total_hits,
                       m.overall_H, m.overall_H_optimal);
    }
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      auto d = open_out(spec.out_dir / decisions_file_name(policy_name(jobs[i].policy), jobs[i].capacity));
      write_decisions(d, results[i].decisions);
    }
  }
  for (const auto& m : reports) {
    out << fmt::format("{} capacity={} overall_H={}\n", m.policy, m.capacity, m.overall_H);
  }
  return kOk;
}

int cmd_bounds(const Flags& f, std::ostream& out) {
  const fs::path dir = f.run_dir.empty() ? fs::path(f.out_dir.value_or("out")) : fs::path(f.run_dir);
  const fs::path dest = f.out_dir && !f.run_dir.empty() ? fs::path(*f.out_dir) : dir;
  const auto rows = read_metrics_csv((dir / "metrics.csv").string());

  // Learning diagnostics, when the run's summary is present.
  std::map<std::pair<std::string, std::size_t>, LearningDiagnostics> learning;
  if (std::ifstream in(dir / "summary.json"); in) {
    nlohmann::json doc;
    try {
      in >> doc;
      for (const auto& run : doc.at("runs")) {
        if (!run.contains("learning")) continue;
        const auto& l = run["learning"];
        LearningDiagnostics d;
        d.samples = l.at("samples").get<std::size_t>();
        d.retrains = l.at("retrains").get<std::size_t>();
        d.weight_diameter = l.at("W").get<double>();
        d.max_gradient_norm = l.at("G").get<double>();
        d.residual_loss = l.at("tau").get<double>();
        learning[{run.at("policy").get<std::string>(), run.at("capacity").get<std::size_t>()}] = d;
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(fmt::format("cannot read '{}': {}", (dir / "summary.json").string(), e.what()));
    }
  }

  const std::regex name(R"(decisions_([A-Z]+)_([0-9]+)\.csv)");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (std::regex_match(entry.path().filename().string(), name)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError(fmt::format("no decision logs in '{}'", dir.string()));

  bool failed = false;
  std::size_t checked = 0;
  for (const auto& file : files) {
    std::smatch m;
    const auto base = file.filename().string();
    std::regex_match(base, m, name);
    const std::string policy = m[1];
    const auto capacity = static_cast<std::size_t>(std::stoull(m[2]));
    const auto decisions = read_decisions(file.string());
    if (std::none_of(decisions.begin(), decisions.end(),
                     [](const DecisionRecord& d) { return d.p_hat.has_value(); })) {
      continue;
    }
    std::vector<PeriodMetrics> periods;
    for (const auto& r : rows) {
      if (r.policy == policy && r.capacity == capacity) periods.push_back(r.period);
    }
    std::optional<LearningDiagnostics> diag;
    if (auto it = learning.find({policy, capacity}); it != learning.end()) diag = it->second;
    const auto report = compute_bounds(periods, decisions, capacity, diag);
    open_out(dest / fmt::format("bounds_{}_{}.json", policy, capacity)) << bound_report_json(report);
    ++checked;
    failed = failed || !report.passed();
    out << fmt::format(
        "{} capacity={} lower_bound checked={} failed={} regime_violations={} invalid_predictions={} "
        "slope={} final_regret={}\n",
        policy, capacity, report.lower_bound_checked, report.lower_bound_failed, report.regime_violations,
        report.invalid_predictions, report.errors.slope, report.final_regret);
  }
  if (checked == 0) throw InputError("no decision log carries popularity predictions");
  return failed ? kBoundFailure : kOk;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  CLI::App app{"Learning-based edge caching simulator"};
  app.require_subcommand(1);
  Flags f;

  auto* ingest = app.add_subcommand("ingest", "Load a request log and write a normalized trace");
  add_common(ingest, f);
  ingest->add_option("--ratings", f.ratings, "Ratings CSV");
  ingest->add_option("--movies", f.movies, "Content metadata CSV");
  ingest->add_option("--user-count", f.user_count, "Keep the N smallest user ids");
  ingest->add_option("--out", f.out, "Normalized trace path (default <out-dir>/trace.csv)");

  auto* synth = app.add_subcommand("synth", "Generate a planted-preference trace");
  add_common(synth, f);

  auto* run = app.add_subcommand("run", "Simulate policies and write metrics");
  add_common(run, f);
  run->add_option("--trace", f.trace, "Normalized trace");

  auto* sweep = app.add_subcommand("sweep", "Simulate a policy x capacity grid");
  add_common(sweep, f);
  sweep->add_option("--trace", f.trace, "Normalized trace");

  auto* bounds = app.add_subcommand("bounds", "Check the theoretical bounds of a finished run");
  add_common(bounds, f);
  bounds->add_option("--run-dir", f.run_dir, "Directory written by run (default <out-dir>)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*ingest) return cmd_ingest(f, out);
    if (*synth) return cmd_synth(f, out);
    if (*run) return cmd_simulate(f, out, false);
    if (*sweep) return cmd_simulate(f, out, true);
    if (*bounds) return cmd_bounds(f, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const Error& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  }
  return kConfigError;
}

}  // namespace edgecache::cli
