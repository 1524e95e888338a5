#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "edgecache/trace.hpp"

namespace edgecache {

struct SynthParams {
  std::uint64_t seed = 1;
  int users = 30;
  /// Evaluation periods.
  int periods = 200;
  /// Extra periods generated before `start`, usable as an initialization set.
  int init_periods = 0;
  int contents_per_period = 10;
  Timestamp period_length = 3600;
  /// First evaluation period starts here (2016-01-01 UTC by default).
  Timestamp start = 1451606400;
  /// Chance that a user is present in a given period.
  double activity = 1.0;
  /// Concentrated: every request for a content falls in its release period.
  /// Otherwise requests trail the release time by an exponential delay.
  bool concentrated = true;
  double delay_mean = 6.0 * 3600.0;
  /// True weights are drawn uniform in
  /// [weight_mean - weight_range, weight_mean + weight_range]. A negative mean
  /// makes requests sparse.
  double weight_range = 2.0;
  double weight_mean = 0.0;
  /// Mix between one regional weight vector and per-user vectors.
  double shared_preference = 0.0;
  /// Per-period uniform perturbation of the true weights. Off by default.
  double drift = 0.0;
  int min_year = 1950;
  int max_year = 2015;
  /// Generation fails when fewer requests are possible or produced.
  std::size_t min_requests = 0;

  void validate() const;
  std::size_t total_contents() const noexcept {
    return static_cast<std::size_t>(periods + init_periods) *
           static_cast<std::size_t>(contents_per_period);
  }
};

struct PlantedWorld {
  SynthParams params;
  /// Indexed by user id - 1; values at the first generated period.
  std::vector<std::vector<double>> true_weights;
  /// Indexed by content id - 1.
  std::vector<ContentRecord> contents;
  std::vector<FeatureVector> features;
  std::vector<Timestamp> release_times;
};

/// Expected popularity of a content at its first request in a period: the
/// mean of the true request probabilities over that period's active users.
struct TruthRow {
  int t = 0;
  ContentId content{};
  double p_true = 0.0;
};

struct SynthResult {
  PlantedWorld world;
  Trace trace;
  std::vector<TruthRow> truth;
  /// Requests strictly before params.start.
  std::size_t init_requests = 0;
};

SynthResult generate(const SynthParams& params);

/// Writes ratings.csv, movies.csv and truth.csv in MovieLens format so the
/// result loads back through load_ratings unchanged.
void write_movielens(const SynthResult& result, const std::filesystem::path& dir);

}  // namespace edgecache
