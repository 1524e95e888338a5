#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "edgecache/preference.hpp"
#include "edgecache/types.hpp"

namespace edgecache {

/// Contents each user has already requested. Append-only within a run.
class UserHistories {
 public:
  bool contains(UserId user, ContentId content) const;
  /// Returns true when the pair was not recorded before.
  bool insert(UserId user, ContentId content);
  std::size_t size(UserId user) const;
  std::size_t total() const noexcept { return total_; }

 private:
  std::unordered_map<UserId, std::unordered_set<ContentId>> seen_;
  std::size_t total_ = 0;
};

/// Per-user preference models, created lazily with zero weights.
class ModelStore {
 public:
  ModelStore(std::size_t dimension, Hyperparams hp = {}, double gamma = 0.2);

  PreferenceModel& get_or_create(UserId user);
  const PreferenceModel* find(UserId user) const;
  /// A user without a model predicts what a fresh model would: 0.5.
  double predict(UserId user, std::span<const double> x) const;

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return models_.size(); }
  const std::map<UserId, PreferenceModel>& models() const noexcept { return models_; }

  void save(const std::filesystem::path& path) const;
  static ModelStore load(const std::filesystem::path& path);

 private:
  std::size_t dimension_;
  Hyperparams hp_;
  double gamma_;
  std::map<UserId, PreferenceModel> models_;
};

struct PopularityEstimate {
  ContentId content{};
  double p_hat = 0.0;
  /// Active users in ascending id order.
  std::vector<std::pair<UserId, double>> per_user;
};

/// Mean over the active users of each user's request probability for the
/// content, with users who already requested it contributing 0.
PopularityEstimate predict_popularity(std::span<const double> x, ContentId content,
                                      std::span<const UserId> active_users,
                                      const ModelStore& models, const UserHistories& histories);

/// Same value as `predict_popularity(...).p_hat` without materializing per-user terms.
double predict_p_hat(std::span<const double> x, ContentId content,
                     std::span<const UserId> active_users, const ModelStore& models,
                     const UserHistories& histories);

/// Residual popularity of a freshly admitted content: p_hat - 1/U_t.
double residual_on_admit(double p_hat, std::size_t active_users);

/// Decrements by 1/U_t the first time `user` requests `content`; later
/// requests of the same pair leave the residual unchanged. Records the pair.
double residual_on_hit(double p_cur, std::size_t active_users, UserId user, ContentId content,
                       UserHistories& histories);

}  // namespace edgecache
