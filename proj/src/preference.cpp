#include "edgecache/preference.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "edgecache/errors.hpp"

namespace edgecache {

namespace {

void check_label(int y) {
  if (y != 0 && y != 1) throw InputError(fmt::format("label must be 0 or 1, got {}", y));
}

void check_dimension(const PreferenceModel& model, std::size_t n) {
  if (model.dimension() != n) {
    throw DimensionError(
        fmt::format("model has dimension {}, sample has {}", model.dimension(), n));
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void Hyperparams::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be non-negative");
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) {
    throw ConfigError("lambda1 must be non-negative");
  }
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) {
    throw ConfigError("lambda2 must be non-negative");
  }
}

PreferenceModel::PreferenceModel(std::size_t dimension, Hyperparams hp_, double gamma)
    : w(dimension, 0.0), z(dimension, 0.0), q(dimension, 0.0), hp(hp_) {
  hp.validate();
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  monitor.gamma = gamma;
}

double sigmoid(double v) noexcept {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double predict_prob(const PreferenceModel& model, std::span<const double> x) {
  check_dimension(model, x.size());
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return std::clamp(sigmoid(dot(model.w, x)), lo, hi);
}

double logistic_loss(const PreferenceModel& model, std::span<const double> x, int y) {
  check_label(y);
  check_dimension(model, x.size());
  // Probability of the observed label, clamped on the same side as the log.
  const double v = dot(model.w, x);
  const double p = std::clamp(sigmoid(y == 1 ? v : -v), kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -std::log(p);
}

std::vector<double> gradient(const PreferenceModel& model, std::span<const double> x, int y) {
  check_label(y);
  const double residual = predict_prob(model, x) - static_cast<double>(y);
  std::vector<double> g(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) g[n] = residual * x[n];
  return g;
}

double proximal_weight(double z, double q, const Hyperparams& hp) noexcept {
  if (std::abs(z) <= hp.lambda1) return 0.0;
  const double sign = z > 0.0 ? 1.0 : -1.0;
  return (hp.lambda1 * sign - z) / (hp.lambda2 + (hp.beta + std::sqrt(q)) / hp.alpha);
}

void ftrl_update(PreferenceModel& model, const Sample& sample) {
  const auto g = gradient(model, sample.x, sample.y);
  if (!all_finite(g)) throw NumericError("non-finite gradient in FTRL update");

  const std::size_t n_dim = model.dimension();
  std::vector<double> z(n_dim), q(n_dim), w(n_dim);
  for (std::size_t n = 0; n < n_dim; ++n) {
    const double q_new = model.q[n] + g[n] * g[n];
    const double sigma = (std::sqrt(q_new) - std::sqrt(model.q[n])) / model.hp.alpha;
    z[n] = model.z[n] + g[n] - sigma * model.w[n];
    q[n] = q_new;
    w[n] = proximal_weight(z[n], q[n], model.hp);
  }
  if (!all_finite(z) || !all_finite(q) || !all_finite(w)) {
    throw NumericError("non-finite state in FTRL update");
  }
  model.z = std::move(z);
  model.q = std::move(q);
  model.w = std::move(w);
}

void ogd_update(PreferenceModel& model, const Sample& sample, std::size_t step) {
  if (step < 1) throw ConfigError("OGD step index starts at 1");
  const auto g = gradient(model, sample.x, sample.y);
  if (!all_finite(g)) throw NumericError("non-finite gradient in OGD update");

  const std::size_t n_dim = model.dimension();
  std::vector<double> q(n_dim), w(n_dim);
  for (std::size_t n = 0; n < n_dim; ++n) {
    q[n] = model.q[n] + g[n] * g[n];
    const double denom = model.hp.beta + std::sqrt(q[n]);
    w[n] = g[n] == 0.0 ? model.w[n] : model.w[n] - model.hp.alpha / denom * g[n];
  }
  if (!all_finite(q) || !all_finite(w)) throw NumericError("non-finite state in OGD update");
  model.q = std::move(q);
  model.w = std::move(w);
}

PreferenceModel train_offline(std::span<const Sample> samples, const Hyperparams& hp,
                              double gamma) {
  if (samples.empty()) throw InputError("offline training needs at least one sample");
  PreferenceModel model(samples.front().x.size(), hp, gamma);
  for (const auto& s : samples) ftrl_update(model, s);
  return model;
}

bool observe_and_maybe_retrain(PreferenceModel& model, const Sample& sample, RetrainMode mode) {
  const double loss = logistic_loss(model, sample.x, sample.y);
  auto& mon = model.monitor;
  mon.K += 1;
  mon.xi = (static_cast<double>(mon.K - 1) * mon.xi + loss) / static_cast<double>(mon.K);
  mon.buffer.push_back(sample);
  if (mon.xi < mon.gamma) return false;

  if (mode == RetrainMode::FromScratch) {
    auto fresh = train_offline(mon.buffer, model.hp, mon.gamma);
    model.w = std::move(fresh.w);
    model.z = std::move(fresh.z);
    model.q = std::move(fresh.q);
  } else {
    PreferenceModel next = model;
    for (const auto& s : mon.buffer) ftrl_update(next, s);
    model.w = std::move(next.w);
    model.z = std::move(next.z);
    model.q = std::move(next.q);
  }
  mon.buffer.clear();
  mon.K = 0;
  mon.xi = 0.0;
  return true;
}

void write_checkpoint(std::ostream& out, UserId user, const PreferenceModel& model) {
  for (const auto* v : {&model.w, &model.z, &model.q}) {
    if (!all_finite(*v)) throw NumericError("cannot checkpoint a non-finite model");
  }
  nlohmann::json buffer = nlohmann::json::array();
  for (const auto& s : model.monitor.buffer) {
    buffer.push_back({{"x", std::vector<double>(s.x.begin(), s.x.end())}, {"y", s.y}});
  }
  const nlohmann::json record = {
      {"user_id", to_int(user)},
      {"w", model.w},
      {"z", model.z},
      {"q", model.q},
      {"hyperparams",
       {{"alpha", model.hp.alpha},
        {"beta", model.hp.beta},
        {"lambda1", model.hp.lambda1},
        {"lambda2", model.hp.lambda2}}},
      {"monitor",
       {{"K", model.monitor.K},
        {"xi", model.monitor.xi},
        {"gamma", model.monitor.gamma},
        {"buffer", std::move(buffer)}}},
  };
  out << record.dump() << '\n';
}

std::vector<std::pair<UserId, PreferenceModel>> read_checkpoint(std::istream& in) {
  std::vector<std::pair<UserId, PreferenceModel>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PreferenceModel m;
      m.w = j.at("w").get<std::vector<double>>();
      m.z = j.at("z").get<std::vector<double>>();
      m.q = j.at("q").get<std::vector<double>>();
      if (m.z.size() != m.w.size() || m.q.size() != m.w.size()) {
        throw ParseError("w, z and q differ in length", line_no);
      }
      const auto& hp = j.at("hyperparams");
      m.hp = {hp.at("alpha").get<double>(), hp.at("beta").get<double>(),
              hp.at("lambda1").get<double>(), hp.at("lambda2").get<double>()};
      m.hp.validate();
      const auto& mon = j.at("monitor");
      m.monitor.K = mon.at("K").get<std::size_t>();
      m.monitor.xi = mon.at("xi").get<double>();
      m.monitor.gamma = mon.at("gamma").get<double>();
      if (auto it = mon.find("buffer"); it != mon.end()) {
        for (const auto& s : *it) {
          m.monitor.buffer.push_back(
              {FeatureVector(s.at("x").get<std::vector<double>>()), s.at("y").get<int>()});
        }
      }
      if (m.monitor.buffer.size() != m.monitor.K) {
        throw ParseError("monitor K does not match the buffered sample count", line_no);
      }
      out.emplace_back(UserId{j.at("user_id").get<std::int64_t>()}, std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

}  // namespace edgecache
