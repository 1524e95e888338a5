#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include "edgecache/cache.hpp"
#include "edgecache/preference.hpp"

namespace oracle {

/// Central finite-difference gradient of the logistic loss with respect to w.
inline std::vector<double> numeric_gradient(const edgecache::PreferenceModel& model,
                                            const std::vector<double>& x, int y,
                                            double h = 1e-6) {
  std::vector<double> g(model.w.size());
  for (std::size_t n = 0; n < model.w.size(); ++n) {
    auto plus = model;
    auto minus = model;
    plus.w[n] += h;
    minus.w[n] -= h;
    g[n] = (edgecache::logistic_loss(plus, x, y) - edgecache::logistic_loss(minus, x, y)) / (2 * h);
  }
  return g;
}

/// z w + l1 |w| + a w^2 / 2.
inline double scalar_objective(double w, double z, double l1, double a) {
  return z * w + l1 * std::abs(w) + 0.5 * a * w * w;
}

/// Grid search over [lo, hi] followed by golden-section refinement around
/// the best grid point.
inline double grid_minimize(double z, double l1, double a, double lo = -10.0, double hi = 10.0,
                            double step = 1e-4) {
  const auto steps = static_cast<std::int64_t>(std::llround((hi - lo) / step));
  double best_w = lo;
  double best_f = std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i <= steps; ++i) {
    const double w = lo + static_cast<double>(i) * step;
    const double f = scalar_objective(w, z, l1, a);
    if (f < best_f) {
      best_f = f;
      best_w = w;
    }
  }
  double a_lo = best_w - step, a_hi = best_w + step;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = a_hi - ratio * (a_hi - a_lo);
    const double m2 = a_lo + ratio * (a_hi - a_lo);
    if (scalar_objective(m1, z, l1, a) <= scalar_objective(m2, z, l1, a)) {
      a_hi = m2;
    } else {
      a_lo = m1;
    }
  }
  const double refined = 0.5 * (a_lo + a_hi);
  // The kink at zero is a common minimizer the refinement can straddle.
  if (best_w - step <= 0.0 && 0.0 <= best_w + step &&
      scalar_objective(0.0, z, l1, a) <= scalar_objective(refined, z, l1, a)) {
    return 0.0;
  }
  return refined;
}

/// Brute-force least entry by (p_cur, t_f, id).
inline std::optional<edgecache::CacheEntry> brute_least(
    const std::vector<edgecache::CacheEntry>& entries) {
  std::optional<edgecache::CacheEntry> best;
  for (const auto& e : entries) {
    if (!best || std::tuple(e.p_cur, e.t_f, edgecache::to_int(e.id)) <
                     std::tuple(best->p_cur, best->t_f, edgecache::to_int(best->id))) {
      best = e;
    }
  }
  return best;
}

/// Random feature vector with roughly `density` non-zero components.
inline std::vector<double> random_features(std::mt19937_64& rng, std::size_t n,
                                           double density = 0.4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n, 0.0);
  for (auto& v : x) {
    if (u(rng) < density) v = u(rng);
  }
  return x;
}

}  // namespace oracle

namespace oracle {

/// Textbook list-based reference for FIFO, LRU and LFU with the same tie
/// rules as the library: LFU ties go to the earlier insertion.
class ReferenceCache {
 public:
  enum class Kind { Fifo, Lru, Lfu };
  ReferenceCache(Kind kind, std::size_t capacity) : kind_(kind), capacity_(capacity) {}

  bool request(std::int64_t id) {
    ++clock_;
    for (auto& e : items_) {
      if (e.id == id) {
        e.last = clock_;
        ++e.count;
        return true;
      }
    }
    if (items_.size() == capacity_) {
      std::size_t victim = 0;
      for (std::size_t i = 1; i < items_.size(); ++i) {
        if (worse(items_[i], items_[victim])) victim = i;
      }
      items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(victim));
    }
    items_.push_back({id, clock_, clock_, 1});
    return false;
  }

  std::vector<std::int64_t> contents() const {
    std::vector<std::int64_t> out;
    for (const auto& e : items_) out.push_back(e.id);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Item {
    std::int64_t id;
    std::int64_t inserted;
    std::int64_t last;
    std::int64_t count;
  };
  bool worse(const Item& a, const Item& b) const {
    switch (kind_) {
      case Kind::Fifo: return a.inserted < b.inserted;
      case Kind::Lru: return a.last < b.last;
      case Kind::Lfu:
        return a.count != b.count ? a.count < b.count : a.inserted < b.inserted;
    }
    return false;
  }

  Kind kind_;
  std::size_t capacity_;
  std::int64_t clock_ = 0;
  std::vector<Item> items_;
};

}  // namespace oracle
