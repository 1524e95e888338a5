#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "edgecache/cache.hpp"
#include "edgecache/popularity.hpp"
#include "edgecache/preference.hpp"
#include "edgecache/random.hpp"
#include "edgecache/trace.hpp"

namespace edgecache {

enum class PolicyKind { Fifo, Lru, Lfu, Optimal, Proposed };

std::string_view policy_name(PolicyKind kind) noexcept;
/// Accepts FIFO, LRU, LFU, OPTIMAL, PROPOSED in any case.
PolicyKind parse_policy(std::string_view name);

struct PolicyDecision {
  bool hit = false;
  bool admitted = false;
  std::optional<ContentId> evicted;
  std::optional<double> p_hat;
};

/// One row of the per-request decision log.
struct DecisionRecord {
  std::size_t request_index = 0;
  int period = 0;
  UserId user{};
  ContentId content{};
  Timestamp timestamp = 0;
  bool hit = false;
  bool admitted = false;
  std::optional<ContentId> evicted;
  std::optional<double> p_hat;
};

/// CSV: request_index,t,user_id,content_id,timestamp,hit,admitted,evicted_id,p_hat.
void write_decisions(std::ostream& out, std::span<const DecisionRecord> records);
std::vector<DecisionRecord> read_decisions(const std::string& path);

class CachePolicy {
 public:
  virtual ~CachePolicy() = default;

  virtual PolicyKind kind() const noexcept = 0;
  virtual std::size_t capacity() const noexcept = 0;
  /// Called before the first request of every non-empty period.
  virtual void begin_period(const TracePeriod& period) { (void)period; }
  virtual PolicyDecision on_request(const Request& request) = 0;
  /// Currently cached ids, ascending.
  virtual std::vector<ContentId> cached() const = 0;
};

/// FIFO, LRU and LFU share one implementation that always admits on a miss
/// and evicts the smallest key.
class ClassicPolicy : public CachePolicy {
 public:
  ClassicPolicy(PolicyKind kind, std::size_t capacity, bool lfu_period_scoped = false);

  PolicyKind kind() const noexcept override { return kind_; }
  std::size_t capacity() const noexcept override { return capacity_; }
  void begin_period(const TracePeriod& period) override;
  PolicyDecision on_request(const Request& request) override;
  std::vector<ContentId> cached() const override;

  /// LFU request count of a cached content (0 when absent).
  std::int64_t count(ContentId content) const;

 private:
  struct Slot {
    std::int64_t inserted = 0;
    std::int64_t last_used = 0;
    std::int64_t count = 0;
  };
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  Key key_of(ContentId id, const Slot& s) const;

  PolicyKind kind_;
  std::size_t capacity_;
  bool lfu_period_scoped_;
  std::int64_t clock_ = 0;
  std::unordered_map<ContentId, Slot> slots_;
  std::set<Key> order_;
};

/// Top-capacity contents of a period by distinct requesting users, ties by
/// smaller id.
std::vector<ContentId> optimal_per_period(const TracePeriod& period, std::size_t capacity);

/// Clairvoyant static cache holding each period's most popular contents.
class OptimalPolicy : public CachePolicy {
 public:
  explicit OptimalPolicy(std::size_t capacity);

  PolicyKind kind() const noexcept override { return PolicyKind::Optimal; }
  std::size_t capacity() const noexcept override { return capacity_; }
  void begin_period(const TracePeriod& period) override;
  PolicyDecision on_request(const Request& request) override;
  std::vector<ContentId> cached() const override;

 private:
  std::size_t capacity_;
  std::unordered_set<ContentId> current_;
};

struct ProposedOptions {
  std::size_t dimension = 0;
  Hyperparams hp;
  double gamma = 0.2;
  int n_neg = 1;
  std::uint64_t seed = 0;
  RetrainMode retrain = RetrainMode::WarmStart;
};

/// Learning statistics collected by the proposed policy.
struct LearningDiagnostics {
  std::size_t samples = 0;
  std::size_t retrains = 0;
  /// Largest per-user diameter of the box spanned by the weight iterates.
  double weight_diameter = 0.0;
  /// Largest gradient norm seen when a sample was observed.
  double max_gradient_norm = 0.0;
  /// Largest per-user logistic loss sum under that user's final model.
  double residual_loss = 0.0;
};

/// Learning-based policy: per-user preference models predict regional
/// popularity, and a residual-popularity priority queue decides admissions.
class ProposedPolicy : public CachePolicy {
 public:
  ProposedPolicy(std::size_t capacity, ProposedOptions options);

  PolicyKind kind() const noexcept override { return PolicyKind::Proposed; }
  std::size_t capacity() const noexcept override { return cache_.capacity(); }
  void begin_period(const TracePeriod& period) override;
  PolicyDecision on_request(const Request& request) override;
  std::vector<ContentId> cached() const override;

  /// Trains the models offline on historical requests and records them in
  /// the user histories and the content library.
  void warm_start(std::span<const Request> history);

  const ModelStore& models() const noexcept { return models_; }
  const UserHistories& histories() const noexcept { return histories_; }
  const CacheState& cache() const noexcept { return cache_; }
  /// Computes the residual-loss term, which needs a pass over stored samples.
  LearningDiagnostics diagnostics() const;

 private:
  void remember_content(const Request& request);
  std::vector<Sample> make_samples(const Request& request);
  std::optional<ContentId> draw_negative(UserId user);
  void track(UserId user, const PreferenceModel& model, const Sample& sample);

  ProposedOptions options_;
  CacheState cache_;
  ModelStore models_;
  UserHistories histories_;
  Rng rng_;
  std::vector<UserId> active_;
  std::vector<ContentId> library_;
  std::unordered_map<ContentId, FeatureVector> features_;

  struct UserTrack {
    std::vector<double> lo, hi;
    std::vector<Sample> samples;
  };
  std::map<UserId, UserTrack> tracks_;
  std::size_t samples_ = 0;
  std::size_t retrains_ = 0;
  double max_gradient_norm_ = 0.0;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::Proposed;
  bool lfu_period_scoped = false;
  ProposedOptions proposed;
};

std::unique_ptr<CachePolicy> make_policy(const PolicySpec& spec, std::size_t capacity);

}  // namespace edgecache
