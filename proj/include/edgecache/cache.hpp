#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "edgecache/popularity.hpp"
#include "edgecache/types.hpp"

namespace edgecache {

struct CacheEntry {
  ContentId id{};
  /// Residual popularity; may go negative.
  double p_cur = 0.0;
  /// Time of the admitting request.
  Timestamp t_f = 0;

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

enum class AdmitOutcome { AdmittedFreeSlot, AdmittedWithEviction, Rejected };

struct AdmitDecision {
  AdmitOutcome outcome = AdmitOutcome::Rejected;
  std::optional<ContentId> evicted;

  bool admitted() const noexcept { return outcome != AdmitOutcome::Rejected; }
};

/// Fixed-capacity cache ordered by (residual popularity, admission time, id).
class CacheState {
 public:
  explicit CacheState(std::size_t capacity);

  bool lookup(ContentId content) const { return entries_.contains(content); }
  std::optional<CacheEntry> peek_least() const;
  const CacheEntry* find(ContentId content) const;

  /// Free slots admit unconditionally. A full cache replaces its least
  /// entry only when p_hat is strictly larger than that entry's residual.
  /// With `charge_requester` false the requester is not subtracted from the
  /// new residual (the pair was already counted).
  AdmitDecision admit_or_reject(ContentId content, double p_hat, Timestamp now,
                                std::size_t active_users, bool charge_requester = true);

  /// Applies the once-per-pair residual decrement for a hit.
  void on_hit(ContentId content, std::size_t active_users, UserId user, UserHistories& histories);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool full() const noexcept { return entries_.size() >= capacity_; }

  /// Entries from least to greatest.
  std::vector<CacheEntry> entries() const;
  /// CSV: content_id,p_cur,t_f in priority order.
  void write_snapshot(std::ostream& out) const;

 private:
  using Key = std::tuple<double, Timestamp, std::int64_t>;
  static Key key_of(const CacheEntry& e) { return {e.p_cur, e.t_f, to_int(e.id)}; }
  void insert(const CacheEntry& entry);
  void erase(ContentId content);

  std::size_t capacity_;
  std::unordered_map<ContentId, CacheEntry> entries_;
  std::set<Key> order_;
};

}  // namespace edgecache
