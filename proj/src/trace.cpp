#include "edgecache/trace.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "edgecache/errors.hpp"
#include "hashing.hpp"

namespace edgecache {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError(fmt::format("dimension mismatch: {} vs {}", a.size(), b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

namespace {

constexpr std::string_view kNoGenres = "(no genres listed)";

std::optional<int> year_from_title(std::string_view title) {
  while (!title.empty() && title.back() == ' ') title.remove_suffix(1);
  if (title.size() < 6 || title.back() != ')') return std::nullopt;
  const auto open = title.rfind('(');
  if (open == std::string_view::npos || title.size() - open != 6) return std::nullopt;
  int year = 0;
  const char* first = title.data() + open + 1;
  auto [ptr, ec] = std::from_chars(first, first + 4, year);
  if (ec != std::errc{} || ptr != first + 4) return std::nullopt;
  return year;
}

std::vector<std::string> split_genres(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(sep, start);
    std::string g = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!g.empty() && g != kNoGenres) out.push_back(std::move(g));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& FeatureExtractor::movielens_genres() {
  static const std::vector<std::string> genres = {
      "Action",  "Adventure", "Animation", "Children", "Comedy",  "Crime",
      "Documentary", "Drama", "Fantasy",   "Film-Noir", "Horror", "Musical",
      "Mystery", "Romance",   "Sci-Fi",    "Thriller",  "War",    "Western"};
  return genres;
}

FeatureExtractor::FeatureExtractor(int min_year, int max_year, double rating_scale,
                                   std::vector<std::string> genres)
    : genres_(std::move(genres)), min_year_(min_year), max_year_(max_year),
      rating_scale_(rating_scale) {
  if (min_year > max_year) throw ConfigError("feature year range is empty");
  if (!(rating_scale > 0.0)) throw ConfigError("rating scale must be positive");
}

FeatureExtractor FeatureExtractor::fit(std::span<const ContentRecord> records,
                                       double rating_scale) {
  std::optional<int> lo, hi;
  for (const auto& r : records) {
    if (!r.year) continue;
    lo = lo ? std::min(*lo, *r.year) : *r.year;
    hi = hi ? std::max(*hi, *r.year) : *r.year;
  }
  return FeatureExtractor(lo.value_or(0), hi.value_or(0), rating_scale);
}

ExtractedFeatures FeatureExtractor::extract(const ContentRecord& record) const {
  ExtractedFeatures out;
  std::vector<double> x(dimension(), 0.0);
  for (const auto& g : record.genres) {
    if (g.empty() || g == kNoGenres) continue;
    auto it = std::find(genres_.begin(), genres_.end(), g);
    if (it != genres_.end()) {
      x[static_cast<std::size_t>(it - genres_.begin())] = 1.0;
    } else {
      x[other_slot()] = 1.0;
      out.warnings.push_back(fmt::format("unknown genre '{}' mapped to the other slot", g));
    }
  }
  if (record.mean_rating) {
    x[rating_slot()] = std::clamp(*record.mean_rating / rating_scale_, 0.0, 1.0);
  } else {
    x[rating_slot()] = 0.5;
    out.warnings.push_back(
        fmt::format("content {} has no ratings; rating feature set to 0.5", to_int(record.id)));
  }
  if (record.year) {
    if (max_year_ == min_year_) {
      x[year_slot()] = 1.0;
    } else {
      const double scaled = static_cast<double>(*record.year - min_year_) /
                            static_cast<double>(max_year_ - min_year_);
      x[year_slot()] = std::clamp(scaled, 0.0, 1.0);
    }
  } else {
    x[year_slot()] = 0.5;
    out.warnings.push_back(
        fmt::format("content {} has no release year; year feature set to 0.5", to_int(record.id)));
  }
  out.features = FeatureVector(std::move(x));
  return out;
}

std::size_t Trace::feature_dimension() const {
  if (!catalog.empty()) return catalog.begin()->second.size();
  if (!requests.empty()) return requests.front().features.size();
  return 0;
}

std::size_t Trace::user_count() const {
  std::unordered_set<UserId> users;
  for (const auto& r : requests) users.insert(r.user);
  return users.size();
}

std::size_t Trace::content_count() const {
  std::unordered_set<ContentId> contents;
  for (const auto& r : requests) contents.insert(r.content);
  return contents.size();
}

std::vector<ContentRecord> read_metadata(const std::filesystem::path& path,
                                         const MetadataSchema& schema) {
  csv::Reader reader(path.string());
  const auto id_col = reader.require(schema.id_column);
  const auto genres_col = reader.require(schema.genres_column);
  const auto title_col = reader.find(schema.title_column);
  std::optional<std::size_t> year_col;
  if (!schema.year_column.empty()) year_col = reader.require(schema.year_column);

  std::vector<ContentRecord> records;
  while (reader.next()) {
    ContentRecord r;
    r.id = ContentId{csv::parse_number<std::int64_t>(reader.field(id_col), reader.line(), "content id")};
    if (title_col) r.title = reader.field(*title_col);
    r.genres = split_genres(reader.field(genres_col), schema.genre_separator);
    if (year_col) {
      const auto& text = reader.field(*year_col);
      if (!text.empty()) r.year = csv::parse_number<int>(text, reader.line(), "year");
    } else {
      r.year = year_from_title(r.title);
    }
    records.push_back(std::move(r));
  }
  return records;
}

void normalize_requests(std::vector<Request>& requests) {
  std::stable_sort(requests.begin(), requests.end(),
                   [](const Request& a, const Request& b) { return a.timestamp < b.timestamp; });
  std::unordered_set<std::pair<UserId, ContentId>, PairHash> seen;
  seen.reserve(requests.size());
  for (auto& r : requests) r.repeat = !seen.emplace(r.user, r.content).second;
}

Trace load_ratings(const std::filesystem::path& ratings_path,
                   const std::filesystem::path& metadata_path, const LoadOptions& options) {
  if (!std::filesystem::exists(metadata_path)) {
    throw InputError("metadata file '" + metadata_path.string() + "' does not exist");
  }
  struct Row {
    UserId user;
    ContentId content;
    Timestamp timestamp;
  };
  std::vector<Row> rows;
  std::unordered_map<ContentId, std::pair<double, std::size_t>> rating_sums;
  {
    csv::Reader reader(ratings_path.string());
    const auto& s = options.ratings;
    const auto user_col = reader.require(s.user_column);
    const auto content_col = reader.require(s.content_column);
    const auto ts_col = reader.require(s.timestamp_column);
    const auto rating_col = s.rating_column.empty() ? std::nullopt : reader.find(s.rating_column);
    while (reader.next()) {
      const auto line = reader.line();
      Row row{UserId{csv::parse_number<std::int64_t>(reader.field(user_col), line, "user id")},
              ContentId{csv::parse_number<std::int64_t>(reader.field(content_col), line, "content id")},
              csv::parse_number<Timestamp>(reader.field(ts_col), line, "timestamp")};
      if (row.timestamp < 0) throw ParseError("negative timestamp", line);
      if (rating_col) {
        const double rating = csv::parse_number<double>(reader.field(*rating_col), line, "rating");
        auto& acc = rating_sums[row.content];
        acc.first += rating;
        acc.second += 1;
      }
      rows.push_back(row);
    }
  }

  if (options.users) {
    const std::unordered_set<UserId> keep(options.users->begin(), options.users->end());
    std::erase_if(rows, [&](const Row& r) { return !keep.contains(r.user); });
  }

  auto records = read_metadata(metadata_path, options.metadata);
  for (auto& rec : records) {
    if (auto it = rating_sums.find(rec.id); it != rating_sums.end()) {
      rec.mean_rating = it->second.first / static_cast<double>(it->second.second);
    }
  }
  std::unordered_map<ContentId, const ContentRecord*> by_id;
  for (const auto& rec : records) by_id.emplace(rec.id, &rec);

  std::set<std::int64_t> missing;
  for (const auto& row : rows) {
    if (!by_id.contains(row.content)) missing.insert(to_int(row.content));
  }
  if (!missing.empty()) {
    std::vector<long long> ids(missing.begin(), missing.end());
    std::string listed;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) {
      listed += (i ? ", " : "") + std::to_string(ids[i]);
    }
    if (ids.size() > 20) listed += fmt::format(", ... ({} total)", ids.size());
    throw JoinError("contents without metadata: " + listed, std::move(ids));
  }

  const auto extractor = FeatureExtractor::fit(records, options.rating_scale);
  Trace trace;
  std::set<std::string> warned;
  for (const auto& row : rows) {
    if (trace.catalog.contains(row.content)) continue;
    auto extracted = extractor.extract(*by_id.at(row.content));
    for (auto& w : extracted.warnings) {
      if (warned.insert(w).second) {
        spdlog::warn("{}", w);
        trace.warnings.push_back(std::move(w));
      }
    }
    trace.catalog.emplace(row.content, std::move(extracted.features));
  }

  trace.requests.reserve(rows.size());
  for (const auto& row : rows) {
    trace.requests.push_back(
        Request{row.user, row.content, row.timestamp, trace.catalog.at(row.content), false});
  }
  normalize_requests(trace.requests);
  return trace;
}

void write_normalized_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  const auto n = trace.feature_dimension();
  out << "user_id,content_id,timestamp";
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
  out << '\n';
  std::string line;
  for (const auto& r : trace.requests) {
    line = fmt::format("{},{},{}", to_int(r.user), to_int(r.content), r.timestamp);
    for (double v : r.features) fmt::format_to(std::back_inserter(line), ",{}", v);
    line.push_back('\n');
    out << line;
  }
}

Trace read_normalized_trace(const std::filesystem::path& path) {
  csv::Reader reader(path.string());
  const auto user_col = reader.require("user_id");
  const auto content_col = reader.require("content_id");
  const auto ts_col = reader.require("timestamp");
  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0;; ++i) {
    auto col = reader.find("x" + std::to_string(i));
    if (!col) break;
    feature_cols.push_back(*col);
  }
  Trace trace;
  std::vector<double> x(feature_cols.size());
  while (reader.next()) {
    const auto line = reader.line();
    Request r;
    r.user = UserId{csv::parse_number<std::int64_t>(reader.field(user_col), line, "user id")};
    r.content = ContentId{csv::parse_number<std::int64_t>(reader.field(content_col), line, "content id")};
    r.timestamp = csv::parse_number<Timestamp>(reader.field(ts_col), line, "timestamp");
    if (r.timestamp < 0) throw ParseError("negative timestamp", line);
    for (std::size_t i = 0; i < feature_cols.size(); ++i) {
      x[i] = csv::parse_number<double>(reader.field(feature_cols[i]), line, "feature");
      if (!(x[i] >= 0.0 && x[i] <= 1.0)) throw ParseError("feature outside [0, 1]", line);
    }
    auto [it, inserted] = trace.catalog.try_emplace(r.content, FeatureVector(x));
    if (!inserted && !std::equal(x.begin(), x.end(), it->second.begin())) {
      throw ParseError(fmt::format("content {} has inconsistent features", to_int(r.content)), line);
    }
    r.features = it->second;
    trace.requests.push_back(std::move(r));
  }
  normalize_requests(trace.requests);
  return trace;
}

int periods_between(Timestamp start, Timestamp end, Timestamp period_length) {
  if (period_length <= 0) throw ConfigError("period length must be positive");
  if (end <= start) return 0;
  return static_cast<int>((end - start + period_length - 1) / period_length);
}

Timestamp default_origin(std::span<const Request> requests, Timestamp period_length) {
  if (period_length <= 0) throw ConfigError("period length must be positive");
  if (requests.empty()) return 0;
  const auto first = requests.front().timestamp;
  return first - first % period_length;
}

int covering_horizon(std::span<const Request> requests, Timestamp period_length,
                     std::optional<Timestamp> origin) {
  if (requests.empty()) return 0;
  const auto start = origin.value_or(default_origin(requests, period_length));
  Timestamp last = start;
  for (const auto& r : requests) last = std::max(last, r.timestamp);
  return static_cast<int>((last - start) / period_length) + 1;
}

std::vector<TracePeriod> bucket_periods(std::span<const Request> requests,
                                        const PeriodOptions& options) {
  if (options.period_length <= 0) throw ConfigError("period length must be positive");
  if (options.horizon <= 0) throw ConfigError("horizon must be at least one period");
  if (options.monitor == MonitorMode::SlidingWindow && options.window < 1) {
    throw ConfigError("monitoring window must be at least one period");
  }
  const auto origin = options.origin.value_or(default_origin(requests, options.period_length));

  std::vector<TracePeriod> periods(static_cast<std::size_t>(options.horizon));
  for (int t = 0; t < options.horizon; ++t) {
    auto& p = periods[static_cast<std::size_t>(t)];
    p.index = t + 1;
    p.start = origin + static_cast<Timestamp>(t) * options.period_length;
    p.end = p.start + options.period_length;
  }

  Timestamp previous = requests.empty() ? 0 : requests.front().timestamp;
  for (const auto& r : requests) {
    if (r.timestamp < previous) throw ConfigError("requests must be sorted by timestamp");
    previous = r.timestamp;
    if (r.timestamp < origin) {
      throw ConfigError(fmt::format("request at {} precedes the first period ({})", r.timestamp, origin));
    }
    const auto t = (r.timestamp - origin) / options.period_length;
    if (t >= options.horizon) {
      throw ConfigError(fmt::format("request at {} falls after period {}; extend the horizon",
                                    r.timestamp, options.horizon));
    }
    periods[static_cast<std::size_t>(t)].requests.push_back(r);
  }

  std::vector<std::vector<UserId>> requesting(periods.size());
  for (std::size_t t = 0; t < periods.size(); ++t) {
    auto& users = requesting[t];
    for (const auto& r : periods[t].requests) users.push_back(r.user);
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
  }

  for (std::size_t t = 0; t < periods.size(); ++t) {
    if (options.monitor == MonitorMode::PerPeriod) {
      periods[t].active_users = requesting[t];
      continue;
    }
    const auto w = static_cast<std::size_t>(options.window);
    const std::size_t first = t + 1 >= w ? t + 1 - w : 0;
    std::vector<UserId> users;
    for (std::size_t s = first; s <= t; ++s) {
      users.insert(users.end(), requesting[s].begin(), requesting[s].end());
    }
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    periods[t].active_users = std::move(users);
  }
  return periods;
}

PeriodStats compute_period_stats(const TracePeriod& period) {
  PeriodStats stats;
  stats.requests = period.requests.size();
  stats.users = period.active_users.size();
  std::unordered_set<std::pair<UserId, ContentId>, PairHash> pairs;
  for (const auto& r : period.requests) {
    if (pairs.emplace(r.user, r.content).second) ++stats.requesting_users[r.content];
  }
  stats.distinct_contents = stats.requesting_users.size();
  if (stats.users > 0) {
    for (const auto& [content, count] : stats.requesting_users) {
      stats.real_popularity[content] = static_cast<double>(count) / static_cast<double>(stats.users);
    }
  }
  return stats;
}

std::pair<std::vector<Request>, std::vector<Request>> split_trace(std::span<const Request> requests,
                                                                  Timestamp cutoff) {
  if (requests.empty()) throw ConfigError("cannot split an empty trace");
  Timestamp lo = requests.front().timestamp, hi = lo;
  for (const auto& r : requests) {
    lo = std::min(lo, r.timestamp);
    hi = std::max(hi, r.timestamp);
  }
  if (cutoff < lo || cutoff > hi) {
    throw ConfigError(fmt::format("cutoff {} outside trace range [{}, {}]", cutoff, lo, hi));
  }
  std::pair<std::vector<Request>, std::vector<Request>> out;
  for (const auto& r : requests) {
    (r.timestamp < cutoff ? out.first : out.second).push_back(r);
  }
  return out;
}

}  // namespace edgecache
