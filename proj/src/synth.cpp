#include "edgecache/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "edgecache/errors.hpp"
#include "edgecache/preference.hpp"
#include "edgecache/random.hpp"

namespace edgecache {

void SynthParams::validate() const {
  if (users < 1) throw ConfigError("synth: users must be at least 1");
  if (periods < 1) throw ConfigError("synth: periods must be at least 1");
  if (init_periods < 0) throw ConfigError("synth: init_periods must be non-negative");
  if (contents_per_period < 1) throw ConfigError("synth: contents_per_period must be at least 1");
  if (period_length < 1) throw ConfigError("synth: period_length must be positive");
  if (start < static_cast<Timestamp>(init_periods) * period_length) {
    throw ConfigError("synth: start leaves no room for the initialization periods");
  }
  if (!(activity > 0.0 && activity <= 1.0)) throw ConfigError("synth: activity must lie in (0, 1]");
  if (!(delay_mean > 0.0)) throw ConfigError("synth: delay_mean must be positive");
  if (!(weight_range >= 0.0)) throw ConfigError("synth: weight_range must be non-negative");
  if (!std::isfinite(weight_mean)) throw ConfigError("synth: weight_mean must be finite");
  if (!(shared_preference >= 0.0 && shared_preference <= 1.0)) {
    throw ConfigError("synth: shared_preference must lie in [0, 1]");
  }
  if (!(drift >= 0.0)) throw ConfigError("synth: drift must be non-negative");
  if (min_year > max_year) throw ConfigError("synth: min_year exceeds max_year");
  const auto capacity = static_cast<std::size_t>(users) * total_contents();
  if (min_requests > capacity) {
    throw ConfigError(fmt::format(
        "synth: {} requests requested but {} users x {} contents allow at most {} without repeats",
        min_requests, users, total_contents(), capacity));
  }
}

SynthResult generate(const SynthParams& params) {
  params.validate();
  SynthResult result;
  auto& world = result.world;
  world.params = params;

  Rng root(params.seed);
  Rng weight_rng = root.fork(1);
  Rng content_rng = root.fork(2);
  Rng request_rng = root.fork(3);

  const auto& genres = FeatureExtractor::movielens_genres();
  const std::size_t dim = genres.size() + 3;
  const double range = params.weight_range;
  const double rho = params.shared_preference;

  std::vector<double> regional(dim);
  const double lo = params.weight_mean - range, hi = params.weight_mean + range;
  for (auto& v : regional) v = weight_rng.uniform(lo, hi);
  auto& weights = world.true_weights;
  weights.assign(static_cast<std::size_t>(params.users), std::vector<double>(dim));
  for (auto& w : weights) {
    for (std::size_t n = 0; n < dim; ++n) {
      w[n] = rho * regional[n] + (1.0 - rho) * weight_rng.uniform(lo, hi);
    }
  }

  const std::size_t total = params.total_contents();
  world.contents.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    ContentRecord rec;
    rec.id = ContentId{static_cast<std::int64_t>(i + 1)};
    rec.year = params.min_year +
               static_cast<int>(content_rng.below(
                   static_cast<std::uint64_t>(params.max_year - params.min_year + 1)));
    rec.title = fmt::format("Synthetic Title {} ({})", i + 1, *rec.year);
    const auto first = content_rng.below(genres.size());
    rec.genres.push_back(genres[first]);
    if (content_rng.bernoulli(0.5)) {
      auto second = content_rng.below(genres.size() - 1);
      if (second >= first) ++second;
      rec.genres.push_back(genres[second]);
    }
    rec.mean_rating = 0.5 * static_cast<double>(2 + content_rng.below(9));
    world.contents.push_back(std::move(rec));
  }
  const auto extractor = FeatureExtractor::fit(world.contents);
  for (const auto& rec : world.contents) world.features.push_back(extractor.extract(rec).features);

  const int all_periods = params.periods + params.init_periods;
  const Timestamp origin = params.start - static_cast<Timestamp>(params.init_periods) * params.period_length;
  const Timestamp horizon_end = origin + static_cast<Timestamp>(all_periods) * params.period_length;
  const auto L = static_cast<std::uint64_t>(params.period_length);
  const auto C = static_cast<std::size_t>(params.contents_per_period);

  std::vector<Request> requests;
  world.release_times.resize(total);
  for (int k = 0; k < all_periods; ++k) {
    const Timestamp period_start = origin + static_cast<Timestamp>(k) * params.period_length;
    const int t = k - params.init_periods + 1;
    if (params.drift > 0.0 && k > 0) {
      for (auto& w : weights) {
        for (auto& v : w) v += request_rng.uniform(-params.drift, params.drift);
      }
    }
    std::vector<std::size_t> present;
    for (std::size_t u = 0; u < weights.size(); ++u) {
      if (params.activity >= 1.0 || request_rng.bernoulli(params.activity)) present.push_back(u);
    }

    std::vector<std::vector<double>> probs(C);
    std::vector<bool> requested_any(weights.size(), false);
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t f = static_cast<std::size_t>(k) * C + c;
      const auto& x = world.features[f];
      const Timestamp release = period_start + static_cast<Timestamp>(request_rng.below(L));
      world.release_times[f] = release;
      for (std::size_t u : present) {
        const double p = sigmoid(dot(weights[u], x));
        probs[c].push_back(p);
        if (!request_rng.bernoulli(p)) continue;
        Timestamp ts;
        if (params.concentrated) {
          ts = period_start + static_cast<Timestamp>(request_rng.below(L));
        } else {
          ts = release + static_cast<Timestamp>(request_rng.exponential(params.delay_mean));
          if (ts >= horizon_end) continue;
        }
        requested_any[u] = true;
        requests.push_back({UserId{static_cast<std::int64_t>(u + 1)},
                            ContentId{static_cast<std::int64_t>(f + 1)}, ts, x, false});
      }
    }

    for (std::size_t c = 0; c < C; ++c) {
      const auto id = ContentId{static_cast<std::int64_t>(static_cast<std::size_t>(k) * C + c + 1)};
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < present.size(); ++i) {
        if (params.concentrated && !requested_any[present[i]]) continue;
        sum += probs[c][i];
        ++count;
      }
      if (!params.concentrated) count = weights.size();
      result.truth.push_back({t, id, count == 0 ? 0.0 : sum / static_cast<double>(count)});
    }
  }

  if (requests.size() < params.min_requests) {
    throw ConfigError(fmt::format("synth: generated {} requests, fewer than the {} required",
                                  requests.size(), params.min_requests));
  }
  normalize_requests(requests);
  for (const auto& r : requests) {
    result.trace.catalog.emplace(r.content, r.features);
    if (r.timestamp < params.start) ++result.init_requests;
  }
  result.trace.requests = std::move(requests);
  return result;
}

void write_movielens(const SynthResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw InputError("cannot write '" + (dir / name).string() + "'");
    return out;
  };
  const auto& contents = result.world.contents;

  auto ratings = open("ratings.csv");
  ratings << "userId,movieId,rating,timestamp\n";
  for (const auto& r : result.trace.requests) {
    const auto& rec = contents[static_cast<std::size_t>(to_int(r.content) - 1)];
    ratings << fmt::format("{},{},{:.1f},{}\n", to_int(r.user), to_int(r.content),
                           *rec.mean_rating, r.timestamp);
  }

  auto movies = open("movies.csv");
  movies << "movieId,title,genres\n";
  for (const auto& rec : contents) {
    std::string joined;
    for (const auto& g : rec.genres) joined += (joined.empty() ? "" : "|") + g;
    movies << fmt::format("{},{},{}\n", to_int(rec.id), rec.title, joined);
  }

  auto truth = open("truth.csv");
  truth << "t,content_id,p_true\n";
  for (const auto& row : result.truth) {
    truth << fmt::format("{},{},{}\n", row.t, to_int(row.content), row.p_true);
  }
}

}  // namespace edgecache
