#include "edgecache/popularity.hpp"

#include <fstream>

#include "edgecache/errors.hpp"

namespace edgecache {

bool UserHistories::contains(UserId user, ContentId content) const {
  auto it = seen_.find(user);
  return it != seen_.end() && it->second.contains(content);
}

bool UserHistories::insert(UserId user, ContentId content) {
  const bool inserted = seen_[user].insert(content).second;
  if (inserted) ++total_;
  return inserted;
}

std::size_t UserHistories::size(UserId user) const {
  auto it = seen_.find(user);
  return it == seen_.end() ? 0 : it->second.size();
}

ModelStore::ModelStore(std::size_t dimension, Hyperparams hp, double gamma)
    : dimension_(dimension), hp_(hp), gamma_(gamma) {
  hp_.validate();
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
}

PreferenceModel& ModelStore::get_or_create(UserId user) {
  auto it = models_.find(user);
  if (it == models_.end()) it = models_.emplace(user, PreferenceModel(dimension_, hp_, gamma_)).first;
  return it->second;
}

const PreferenceModel* ModelStore::find(UserId user) const {
  auto it = models_.find(user);
  return it == models_.end() ? nullptr : &it->second;
}

double ModelStore::predict(UserId user, std::span<const double> x) const {
  if (x.size() != dimension_) {
    throw DimensionError("feature dimension does not match the model store");
  }
  const auto* model = find(user);
  return model ? predict_prob(*model, x) : 0.5;
}

void ModelStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  for (const auto& [user, model] : models_) write_checkpoint(out, user, model);
}

ModelStore ModelStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  auto records = read_checkpoint(in);
  if (records.empty()) throw ParseError("checkpoint '" + path.string() + "' is empty", 0);
  const auto& first = records.front().second;
  ModelStore store(first.dimension(), first.hp, first.monitor.gamma);
  for (auto& [user, model] : records) {
    if (model.dimension() != store.dimension_) {
      throw DimensionError("checkpoint mixes model dimensions");
    }
    store.models_.insert_or_assign(user, std::move(model));
  }
  return store;
}

PopularityEstimate predict_popularity(std::span<const double> x, ContentId content,
                                      std::span<const UserId> active_users,
                                      const ModelStore& models, const UserHistories& histories) {
  if (active_users.empty()) throw ConfigError("popularity is undefined without active users");
  PopularityEstimate est;
  est.content = content;
  est.per_user.reserve(active_users.size());
  double sum = 0.0;
  for (UserId u : active_users) {
    const double p = histories.contains(u, content) ? 0.0 : models.predict(u, x);
    est.per_user.emplace_back(u, p);
    sum += p;
  }
  est.p_hat = sum / static_cast<double>(active_users.size());
  return est;
}

double predict_p_hat(std::span<const double> x, ContentId content,
                     std::span<const UserId> active_users, const ModelStore& models,
                     const UserHistories& histories) {
  if (active_users.empty()) throw ConfigError("popularity is undefined without active users");
  double sum = 0.0;
  for (UserId u : active_users) {
    if (!histories.contains(u, content)) sum += models.predict(u, x);
  }
  return sum / static_cast<double>(active_users.size());
}

double residual_on_admit(double p_hat, std::size_t active_users) {
  if (active_users < 1) throw ConfigError("active user count must be at least 1");
  return p_hat - 1.0 / static_cast<double>(active_users);
}

double residual_on_hit(double p_cur, std::size_t active_users, UserId user, ContentId content,
                       UserHistories& histories) {
  if (active_users < 1) throw ConfigError("active user count must be at least 1");
  if (!histories.insert(user, content)) return p_cur;
  return p_cur - 1.0 / static_cast<double>(active_users);
}

}  // namespace edgecache
