#include "edgecache/cache.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "edgecache/errors.hpp"

namespace edgecache {

CacheState::CacheState(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("cache capacity must be at least 1");
}

std::optional<CacheEntry> CacheState::peek_least() const {
  if (order_.empty()) return std::nullopt;
  const auto id = ContentId{std::get<2>(*order_.begin())};
  return entries_.at(id);
}

const CacheEntry* CacheState::find(ContentId content) const {
  auto it = entries_.find(content);
  return it == entries_.end() ? nullptr : &it->second;
}

void CacheState::insert(const CacheEntry& entry) {
  entries_.emplace(entry.id, entry);
  order_.insert(key_of(entry));
}

void CacheState::erase(ContentId content) {
  auto it = entries_.find(content);
  order_.erase(key_of(it->second));
  entries_.erase(it);
}

AdmitDecision CacheState::admit_or_reject(ContentId content, double p_hat, Timestamp now,
                                          std::size_t active_users, bool charge_requester) {
  if (!std::isfinite(p_hat)) throw NumericError("non-finite popularity estimate");
  if (lookup(content)) {
    throw std::logic_error(fmt::format("content {} is already cached", to_int(content)));
  }
  const double p_cur = charge_requester ? residual_on_admit(p_hat, active_users) : p_hat;
  if (!full()) {
    insert({content, p_cur, now});
    return {AdmitOutcome::AdmittedFreeSlot, std::nullopt};
  }
  const auto least = *peek_least();
  if (!(p_hat > least.p_cur)) return {AdmitOutcome::Rejected, std::nullopt};
  erase(least.id);
  insert({content, p_cur, now});
  return {AdmitOutcome::AdmittedWithEviction, least.id};
}

void CacheState::on_hit(ContentId content, std::size_t active_users, UserId user,
                        UserHistories& histories) {
  auto it = entries_.find(content);
  if (it == entries_.end()) {
    throw std::logic_error(fmt::format("hit on content {} which is not cached", to_int(content)));
  }
  const double updated = residual_on_hit(it->second.p_cur, active_users, user, content, histories);
  if (updated == it->second.p_cur) return;
  order_.erase(key_of(it->second));
  it->second.p_cur = updated;
  order_.insert(key_of(it->second));
}

std::vector<CacheEntry> CacheState::entries() const {
  std::vector<CacheEntry> out;
  out.reserve(order_.size());
  for (const auto& key : order_) out.push_back(entries_.at(ContentId{std::get<2>(key)}));
  return out;
}

void CacheState::write_snapshot(std::ostream& out) const {
  out << "content_id,p_cur,t_f\n";
  for (const auto& e : entries()) out << fmt::format("{},{},{}\n", to_int(e.id), e.p_cur, e.t_f);
}

}  // namespace edgecache
