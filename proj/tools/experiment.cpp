#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "edgecache/errors.hpp"

namespace edgecache::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

// null clears an optional value.
template <typename T>
void read(const json& obj, const char* key, std::optional<T>& out) {
  if (auto it = obj.find(key); it != obj.end()) {
    if (it->is_null()) out.reset();
    else out = it->get<T>();
  }
}

void read_trace(const json& t, TraceSource& src) {
  reject_unknown(t, "'trace'",
                 {"ratings", "movies", "normalized", "user_count", "users", "init_cutoff",
                  "rating_scale", "ratings_columns", "metadata_columns"});
  std::optional<std::string> s;
  read(t, "ratings", s);
  if (s) src.ratings = *s;
  s.reset();
  read(t, "movies", s);
  if (s) src.movies = *s;
  s.reset();
  read(t, "normalized", s);
  if (s) src.normalized = *s;
  read(t, "user_count", src.user_count);
  read(t, "init_cutoff", src.init_cutoff);
  read(t, "rating_scale", src.load.rating_scale);
  if (auto it = t.find("users"); it != t.end()) {
    std::vector<UserId> users;
    for (auto id : it->get<std::vector<std::int64_t>>()) users.push_back(UserId{id});
    src.load.users = std::move(users);
  }
  if (auto it = t.find("ratings_columns"); it != t.end()) {
    reject_unknown(*it, "'trace.ratings_columns'", {"user", "content", "timestamp", "rating"});
    auto& r = src.load.ratings;
    read(*it, "user", r.user_column);
    read(*it, "content", r.content_column);
    read(*it, "timestamp", r.timestamp_column);
    read(*it, "rating", r.rating_column);
  }
  if (auto it = t.find("metadata_columns"); it != t.end()) {
    reject_unknown(*it, "'trace.metadata_columns'",
                   {"id", "title", "genres", "year", "genre_separator"});
    auto& m = src.load.metadata;
    read(*it, "id", m.id_column);
    read(*it, "title", m.title_column);
    read(*it, "genres", m.genres_column);
    read(*it, "year", m.year_column);
    std::string sep;
    read(*it, "genre_separator", sep);
    if (!sep.empty()) {
      if (sep.size() != 1) throw ConfigError("genre_separator must be a single character");
      m.genre_separator = sep[0];
    }
  }
}

SynthParams read_synth(const json& s) {
  reject_unknown(s, "'synth'",
                 {"users", "periods", "init_periods", "contents_per_period", "period_length", "start",
                  "activity", "concentrated", "delay_mean", "weight_range", "weight_mean",
                  "shared_preference", "drift", "min_year", "max_year", "min_requests"});
  SynthParams p;
  read(s, "users", p.users);
  read(s, "periods", p.periods);
  read(s, "init_periods", p.init_periods);
  read(s, "contents_per_period", p.contents_per_period);
  read(s, "period_length", p.period_length);
  read(s, "start", p.start);
  read(s, "activity", p.activity);
  read(s, "concentrated", p.concentrated);
  read(s, "delay_mean", p.delay_mean);
  read(s, "weight_range", p.weight_range);
  read(s, "weight_mean", p.weight_mean);
  read(s, "shared_preference", p.shared_preference);
  read(s, "drift", p.drift);
  read(s, "min_year", p.min_year);
  read(s, "max_year", p.max_year);
  read(s, "min_requests", p.min_requests);
  return p;
}

void read_sim(const json& s, ExperimentSpec& spec) {
  reject_unknown(s, "'sim'",
                 {"M", "phi", "period_length", "horizon", "gamma", "alpha", "beta", "lambda1",
                  "lambda2", "n_neg", "retrain", "lfu_period_scoped", "origin", "monitor", "window"});
  auto& c = spec.sim;
  read(s, "M", c.M);
  read(s, "phi", c.phi);
  read(s, "period_length", c.period_length);
  read(s, "horizon", c.horizon);
  read(s, "gamma", c.gamma);
  read(s, "alpha", c.hp.alpha);
  read(s, "beta", c.hp.beta);
  read(s, "lambda1", c.hp.lambda1);
  read(s, "lambda2", c.hp.lambda2);
  read(s, "n_neg", c.n_neg);
  read(s, "lfu_period_scoped", c.lfu_period_scoped);
  read(s, "origin", spec.origin);
  read(s, "window", spec.window);
  if (auto it = s.find("retrain"); it != s.end()) {
    const auto mode = it->get<std::string>();
    if (mode == "warm_start") c.retrain = RetrainMode::WarmStart;
    else if (mode == "from_scratch") c.retrain = RetrainMode::FromScratch;
    else throw ConfigError(fmt::format("unknown retrain mode '{}'", mode));
  }
  if (auto it = s.find("monitor"); it != s.end()) {
    const auto mode = it->get<std::string>();
    if (mode == "per_period") spec.monitor = MonitorMode::PerPeriod;
    else if (mode == "sliding_window") spec.monitor = MonitorMode::SlidingWindow;
    else throw ConfigError(fmt::format("unknown monitor mode '{}'", mode));
  }
}

Trace filter_users(Trace trace, std::size_t count) {
  std::set<UserId> all;
  for (const auto& r : trace.requests) all.insert(r.user);
  std::set<UserId> keep;
  for (auto u : all) {
    if (keep.size() == count) break;
    keep.insert(u);
  }
  std::erase_if(trace.requests, [&](const Request& r) { return !keep.contains(r.user); });
  return trace;
}

}  // namespace

nlohmann::json synth_to_json(const SynthParams& p) {
  return {{"users", p.users},
          {"periods", p.periods},
          {"init_periods", p.init_periods},
          {"contents_per_period", p.contents_per_period},
          {"period_length", p.period_length},
          {"start", p.start},
          {"activity", p.activity},
          {"concentrated", p.concentrated},
          {"delay_mean", p.delay_mean},
          {"weight_range", p.weight_range},
          {"weight_mean", p.weight_mean},
          {"shared_preference", p.shared_preference},
          {"drift", p.drift},
          {"min_year", p.min_year},
          {"max_year", p.max_year},
          {"min_requests", p.min_requests}};
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& doc) {
  ExperimentSpec spec;
  try {
    reject_unknown(doc, "the config",
                   {"seed", "trace", "synth", "sim", "policies", "capacities", "out_dir", "jobs"});
    read(doc, "seed", spec.seed);
    if (auto it = doc.find("trace"); it != doc.end()) read_trace(*it, spec.trace);
    if (auto it = doc.find("synth"); it != doc.end()) spec.synth = read_synth(*it);
    if (auto it = doc.find("sim"); it != doc.end()) read_sim(*it, spec);
    if (auto it = doc.find("policies"); it != doc.end()) {
      for (const auto& name : it->get<std::vector<std::string>>()) {
        spec.policies.push_back(parse_policy(name));
      }
    }
    read(doc, "capacities", spec.capacities);
    std::optional<std::string> out;
    read(doc, "out_dir", out);
    if (out) spec.out_dir = *out;
    read(doc, "jobs", spec.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("invalid config value: {}", e.what()));
  }
  return spec;
}

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open config '{}'", path.string()));
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  return from_json(doc);
}

void ExperimentSpec::validate() const {
  sim.validate();
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (window < 1) throw ConfigError("window must be at least 1");
  for (auto c : capacities) {
    if (c == 0 || c % static_cast<std::size_t>(sim.M) != 0) {
      throw ConfigError(fmt::format("capacity {} is not a positive multiple of M = {}", c, sim.M));
    }
  }
  if (synth) {
    synth->validate();
    if (synth->period_length != sim.period_length) {
      throw ConfigError("synth.period_length must equal sim.period_length");
    }
  }
  const int sources = (synth ? 1 : 0) + (trace.normalized ? 1 : 0) +
                      (trace.ratings || trace.movies ? 1 : 0);
  if (sources > 1) throw ConfigError("give exactly one of synth, trace.normalized, trace.ratings");
  if ((trace.ratings != std::nullopt) != (trace.movies != std::nullopt)) {
    throw ConfigError("trace.ratings and trace.movies go together");
  }
}

PreparedTrace prepare(const ExperimentSpec& spec) {
  PreparedTrace out;
  std::optional<Timestamp> cutoff = spec.trace.init_cutoff;
  std::optional<Timestamp> origin = spec.origin;
  int horizon = spec.sim.horizon;

  if (spec.synth) {
    auto params = *spec.synth;
    params.seed = spec.seed;
    out.synth = generate(params);
    out.trace = out.synth->trace;
    if (!cutoff) cutoff = params.start;
    if (!origin) origin = params.start;
    if (horizon == 0) horizon = params.periods;
  } else if (spec.trace.normalized) {
    out.trace = read_normalized_trace(*spec.trace.normalized);
  } else if (spec.trace.ratings) {
    out.trace = load_ratings(*spec.trace.ratings, *spec.trace.movies, spec.trace.load);
  } else {
    throw ConfigError("no trace: give synth, trace.normalized or trace.ratings/movies");
  }
  if (spec.trace.user_count) out.trace = filter_users(std::move(out.trace), *spec.trace.user_count);

  const auto& all = out.trace.requests;
  auto split = all.begin();
  if (cutoff) {
    split = std::partition_point(all.begin(), all.end(),
                                 [&](const Request& r) { return r.timestamp < *cutoff; });
  }
  out.init.assign(all.begin(), split);
  const std::vector<Request> eval(split, all.end());

  PeriodOptions po;
  po.period_length = spec.sim.period_length;
  po.monitor = spec.monitor;
  po.window = spec.window;
  if (!origin && !eval.empty()) origin = default_origin(eval, po.period_length);
  po.origin = origin;
  if (horizon == 0) horizon = eval.empty() ? 1 : covering_horizon(eval, po.period_length, origin);
  po.horizon = horizon;
  out.periods = bucket_periods(eval, po);
  return out;
}

std::vector<Job> jobs_of(const ExperimentSpec& spec) {
  auto policies = spec.policies;
  if (policies.empty()) policies.push_back(spec.sim.policy);
  auto capacities = spec.capacities;
  if (capacities.empty()) capacities.push_back(spec.sim.capacity());
  std::vector<Job> jobs;
  for (auto c : capacities) {
    for (auto p : policies) jobs.push_back({p, c});
  }
  return jobs;
}

std::vector<RunResult> run_jobs(const ExperimentSpec& spec, const PreparedTrace& prepared,
                                const std::vector<Job>& jobs) {
  std::vector<RunResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        SimConfig config = spec.sim;
        config.policy = jobs[i].policy;
        config.phi = static_cast<int>(jobs[i].capacity / static_cast<std::size_t>(config.M));
        config.seed = spec.seed;
        config.horizon = static_cast<int>(prepared.periods.size());
        results[i] = run(prepared.periods, config, prepared.init);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(spec.jobs), jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::string decisions_file_name(std::string_view policy, std::size_t capacity) {
  return fmt::format("decisions_{}_{}.csv", policy, capacity);
}

}  // namespace edgecache::cli
