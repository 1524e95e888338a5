#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

/// Column names of a ratings-style request log. The rating column is optional
/// and only used to derive per-content mean ratings.
struct RatingsSchema {
  std::string user_column = "userId";
  std::string content_column = "movieId";
  std::string timestamp_column = "timestamp";
  std::string rating_column = "rating";
};

/// Column names of the content metadata file. When `year_column` is empty the
/// release year is parsed from a trailing "(YYYY)" in the title.
struct MetadataSchema {
  std::string id_column = "movieId";
  std::string title_column = "title";
  std::string genres_column = "genres";
  std::string year_column;
  char genre_separator = '|';
};

struct ContentRecord {
  ContentId id{};
  std::string title;
  std::vector<std::string> genres;
  std::optional<double> mean_rating;
  std::optional<int> year;
};

struct ExtractedFeatures {
  FeatureVector features;
  std::vector<std::string> warnings;
};

/// Maps content metadata onto a fixed-layout feature vector:
/// [named genre one-hot | other genre | mean rating / rating_scale | scaled year].
class FeatureExtractor {
 public:
  /// The 18 named MovieLens genres, in file-documentation order.
  static const std::vector<std::string>& movielens_genres();

  FeatureExtractor(int min_year, int max_year, double rating_scale = 5.0,
                   std::vector<std::string> genres = movielens_genres());

  /// Year range taken from every record that carries a year.
  static FeatureExtractor fit(std::span<const ContentRecord> records, double rating_scale = 5.0);

  std::size_t dimension() const noexcept { return genres_.size() + 3; }
  std::size_t genre_slots() const noexcept { return genres_.size() + 1; }
  std::size_t other_slot() const noexcept { return genres_.size(); }
  std::size_t rating_slot() const noexcept { return genres_.size() + 1; }
  std::size_t year_slot() const noexcept { return genres_.size() + 2; }
  const std::vector<std::string>& genres() const noexcept { return genres_; }
  int min_year() const noexcept { return min_year_; }
  int max_year() const noexcept { return max_year_; }

  ExtractedFeatures extract(const ContentRecord& record) const;

 private:
  std::vector<std::string> genres_;
  int min_year_;
  int max_year_;
  double rating_scale_;
};

/// A loaded request log: requests sorted by timestamp (stable), each joined
/// to the features of its content.
struct Trace {
  std::vector<Request> requests;
  std::map<ContentId, FeatureVector> catalog;
  std::vector<std::string> warnings;

  std::size_t feature_dimension() const;
  std::size_t user_count() const;
  std::size_t content_count() const;
};

struct LoadOptions {
  RatingsSchema ratings;
  MetadataSchema metadata;
  /// Keep only these users. Mean ratings are still computed over all rows.
  std::optional<std::vector<UserId>> users;
  double rating_scale = 5.0;
};

std::vector<ContentRecord> read_metadata(const std::filesystem::path& path,
                                         const MetadataSchema& schema = {});

Trace load_ratings(const std::filesystem::path& ratings_path,
                   const std::filesystem::path& metadata_path, const LoadOptions& options = {});

/// Sorts by timestamp (stable) and sets `Request::repeat` on every
/// (user, content) pair after its first occurrence.
void normalize_requests(std::vector<Request>& requests);

/// Normalized trace CSV: user_id,content_id,timestamp,x0..x{N-1}.
void write_normalized_trace(const Trace& trace, const std::filesystem::path& path);
Trace read_normalized_trace(const std::filesystem::path& path);

enum class MonitorMode {
  /// U_t = users with at least one request in period t.
  PerPeriod,
  /// U_t = users with at least one request in periods [t - W + 1, t].
  SlidingWindow,
};

struct PeriodOptions {
  Timestamp period_length = 3600;
  int horizon = 0;
  /// Start of period 1. Defaults to the first timestamp floored to a
  /// multiple of `period_length`.
  std::optional<Timestamp> origin;
  MonitorMode monitor = MonitorMode::PerPeriod;
  int window = 24;
};

struct TracePeriod {
  int index = 0;
  Timestamp start = 0;
  Timestamp end = 0;
  std::vector<Request> requests;
  /// Sorted ascending.
  std::vector<UserId> active_users;
};

/// Number of whole periods needed to cover [start, end).
int periods_between(Timestamp start, Timestamp end, Timestamp period_length);

/// Smallest horizon that covers every request from the given origin.
int covering_horizon(std::span<const Request> requests, Timestamp period_length,
                     std::optional<Timestamp> origin = std::nullopt);

Timestamp default_origin(std::span<const Request> requests, Timestamp period_length);

std::vector<TracePeriod> bucket_periods(std::span<const Request> requests,
                                        const PeriodOptions& options);

struct PeriodStats {
  std::size_t requests = 0;
  std::size_t distinct_contents = 0;
  std::size_t users = 0;
  /// Fraction of active users that requested the content in the period.
  std::map<ContentId, double> real_popularity;
  /// Distinct requesting users per content.
  std::map<ContentId, std::size_t> requesting_users;
};

PeriodStats compute_period_stats(const TracePeriod& period);

/// Initialization set = requests strictly before `cutoff`; evaluation set = the rest.
std::pair<std::vector<Request>, std::vector<Request>> split_trace(std::span<const Request> requests,
                                                                  Timestamp cutoff);

}  // namespace edgecache
