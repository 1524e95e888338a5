#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgecache/sim.hpp"
#include "edgecache/synth.hpp"
#include "edgecache/trace.hpp"

namespace edgecache::cli {

struct TraceSource {
  std::optional<std::filesystem::path> ratings;
  std::optional<std::filesystem::path> movies;
  /// A normalized trace written by `ingest` or `synth`.
  std::optional<std::filesystem::path> normalized;
  LoadOptions load;
  /// Keep the N smallest user ids.
  std::optional<std::size_t> user_count;
  /// Requests before this timestamp seed the proposed policy.
  std::optional<Timestamp> init_cutoff;
};

/// Everything one config file can hold. Flags override file values.
struct ExperimentSpec {
  std::uint64_t seed = 1;
  TraceSource trace;
  std::optional<SynthParams> synth;
  SimConfig sim;
  std::optional<Timestamp> origin;
  MonitorMode monitor = MonitorMode::PerPeriod;
  int window = 24;
  std::vector<PolicyKind> policies;
  /// Total capacities M*phi; empty means the single sim capacity.
  std::vector<std::size_t> capacities;
  std::filesystem::path out_dir = "out";
  int jobs = 1;

  /// Throws ConfigError on unknown keys or bad values.
  static ExperimentSpec from_json(const nlohmann::json& doc);
  static ExperimentSpec load(const std::filesystem::path& path);
  void validate() const;
};

nlohmann::json synth_to_json(const SynthParams& p);

/// A trace split into the initialization requests and bucketed periods.
struct PreparedTrace {
  Trace trace;
  std::vector<Request> init;
  std::vector<TracePeriod> periods;
  std::optional<SynthResult> synth;
};

/// Loads or generates the spec's trace and buckets it.
PreparedTrace prepare(const ExperimentSpec& spec);

struct Job {
  PolicyKind policy = PolicyKind::Proposed;
  std::size_t capacity = 0;
};

std::vector<Job> jobs_of(const ExperimentSpec& spec);

/// Runs every job on up to `spec.jobs` threads; results keep job order.
std::vector<RunResult> run_jobs(const ExperimentSpec& spec, const PreparedTrace& prepared,
                                const std::vector<Job>& jobs);

std::string decisions_file_name(std::string_view policy, std::size_t capacity);

}  // namespace edgecache::cli
