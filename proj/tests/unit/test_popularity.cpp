#include <doctest.h>

#include <cmath>
#include <random>

#include "edgecache/errors.hpp"
#include "edgecache/popularity.hpp"
#include "oracles.hpp"

using namespace edgecache;

namespace {

/// Weight on a single always-on feature that yields probability p.
double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_CASE("predict_popularity averages over active users") {
  ModelStore models(1);
  const std::vector<double> probs = {0.2, 0.4, 0.6, 0.8};
  for (int u = 0; u < 4; ++u) models.get_or_create(UserId{u}).w[0] = logit(probs[static_cast<std::size_t>(u)]);
  UserHistories hist;
  hist.insert(UserId{2}, ContentId{9});
  const std::vector<UserId> active = {UserId{0}, UserId{1}, UserId{2}, UserId{3}};
  const std::vector<double> x = {1.0};
  const auto est = predict_popularity(x, ContentId{9}, active, models, hist);
  CHECK(est.p_hat == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(est.per_user[2].second == 0.0);
  CHECK(est.p_hat == predict_p_hat(x, ContentId{9}, active, models, hist));

  for (auto u : active) hist.insert(u, ContentId{9});
  CHECK(predict_popularity(x, ContentId{9}, active, models, hist).p_hat == 0.0);
}

TEST_CASE("fresh users predict one half") {
  ModelStore models(3);
  UserHistories hist;
  const std::vector<UserId> active = {UserId{5}, UserId{6}};
  CHECK(predict_popularity(std::vector<double>{0.1, 0.2, 0.3}, ContentId{1}, active, models, hist).p_hat == 0.5);
  CHECK(models.size() == 0);
  CHECK_THROWS_AS(predict_popularity(std::vector<double>{0.1, 0.2, 0.3}, ContentId{1}, {}, models, hist),
                  ConfigError);
}

TEST_CASE("predict_popularity matches a brute-force recomputation") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uw(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    ModelStore models(6);
    UserHistories hist;
    std::vector<UserId> active;
    const int users = 1 + static_cast<int>(rng() % 12);
    for (int u = 0; u < users; ++u) {
      active.push_back(UserId{u});
      if (rng() % 3 != 0) {
        for (auto& w : models.get_or_create(UserId{u}).w) w = uw(rng);
      }
      if (rng() % 4 == 0) hist.insert(UserId{u}, ContentId{1});
    }
    const auto x = oracle::random_features(rng, 6, 0.7);
    const auto est = predict_popularity(x, ContentId{1}, active, models, hist);
    double sum = 0;
    for (auto u : active) {
      double p = 0.5;
      if (const auto* m = models.find(u)) {
        double v = 0;
        for (std::size_t n = 0; n < 6; ++n) v += m->w[n] * x[n];
        p = 1.0 / (1.0 + std::exp(-v));
      }
      sum += hist.contains(u, ContentId{1}) ? 0.0 : p;
    }
    CHECK(est.p_hat == doctest::Approx(sum / users).epsilon(1e-12));
    CHECK((est.p_hat >= 0.0 && est.p_hat <= 1.0));
    for (const auto& [u, p] : est.per_user) {
      if (hist.contains(u, ContentId{1})) CHECK(p == 0.0);
    }
  }
}

TEST_CASE("residual_on_admit arithmetic") {
  CHECK(residual_on_admit(0.35, 4) == doctest::Approx(0.10).epsilon(1e-12));
  CHECK(residual_on_admit(0.1, 4) == doctest::Approx(-0.15).epsilon(1e-12));
  CHECK(residual_on_admit(1.0, 1) == 0.0);
  CHECK_THROWS_AS(residual_on_admit(0.5, 0), ConfigError);
}

TEST_CASE("residual_on_hit decrements once per pair") {
  UserHistories hist;
  double p = residual_on_hit(0.10, 4, UserId{1}, ContentId{7}, hist);
  CHECK(p == doctest::Approx(-0.15).epsilon(1e-12));
  CHECK(residual_on_hit(p, 4, UserId{1}, ContentId{7}, hist) == p);
  CHECK(hist.contains(UserId{1}, ContentId{7}));

  UserHistories fresh;
  double q = residual_on_hit(0.5, 4, UserId{1}, ContentId{3}, fresh);
  CHECK(q == 0.25);
  q = residual_on_hit(q, 4, UserId{2}, ContentId{3}, fresh);
  CHECK(q == 0.0);
}

TEST_CASE("history insertions zero later predictions") {
  ModelStore models(1);
  UserHistories hist;
  const std::vector<UserId> active = {UserId{1}, UserId{2}};
  const std::vector<double> x = {1.0};
  CHECK(predict_popularity(x, ContentId{4}, active, models, hist).per_user[0].second == 0.5);
  hist.insert(UserId{1}, ContentId{4});
  for (int i = 0; i < 3; ++i) {
    const auto est = predict_popularity(x, ContentId{4}, active, models, hist);
    CHECK(est.per_user[0].second == 0.0);
    CHECK(est.per_user[1].second == 0.5);
  }
  CHECK(hist.size(UserId{1}) == 1);
  CHECK(hist.total() == 1);
}

TEST_CASE("model store checkpoint") {
  ModelStore models(2, Hyperparams{0.2, 1.0, 0.0, 0.0}, 0.3);
  models.get_or_create(UserId{3}).w = {0.25, -1.5};
  models.get_or_create(UserId{1});
  const auto path = std::filesystem::temp_directory_path() / "edgecache-models.jsonl";
  models.save(path);
  const auto back = ModelStore::load(path);
  std::filesystem::remove(path);
  CHECK(back.size() == 2);
  CHECK(back.find(UserId{3})->w == std::vector<double>{0.25, -1.5});
  CHECK(back.find(UserId{3})->hp.alpha == 0.2);
  CHECK(back.find(UserId{1})->monitor.gamma == 0.3);
}
