#include "edgecache/policies.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "csv.hpp"
#include "edgecache/errors.hpp"

namespace edgecache {

std::string_view policy_name(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::Fifo: return "FIFO";
    case PolicyKind::Lru: return "LRU";
    case PolicyKind::Lfu: return "LFU";
    case PolicyKind::Optimal: return "OPTIMAL";
    case PolicyKind::Proposed: return "PROPOSED";
  }
  return "UNKNOWN";
}

PolicyKind parse_policy(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto kind : {PolicyKind::Fifo, PolicyKind::Lru, PolicyKind::Lfu, PolicyKind::Optimal,
                    PolicyKind::Proposed}) {
    if (policy_name(kind) == upper) return kind;
  }
  throw ConfigError(fmt::format("unknown policy '{}'", name));
}

void write_decisions(std::ostream& out, std::span<const DecisionRecord> records) {
  out << "request_index,t,user_id,content_id,timestamp,hit,admitted,evicted_id,p_hat\n";
  std::string line;
  for (const auto& r : records) {
    line = fmt::format("{},{},{},{},{},{},{},", r.request_index, r.period, to_int(r.user),
                       to_int(r.content), r.timestamp, r.hit ? 1 : 0, r.admitted ? 1 : 0);
    if (r.evicted) fmt::format_to(std::back_inserter(line), "{}", to_int(*r.evicted));
    line.push_back(',');
    if (r.p_hat) fmt::format_to(std::back_inserter(line), "{}", *r.p_hat);
    line.push_back('\n');
    out << line;
  }
}

std::vector<DecisionRecord> read_decisions(const std::string& path) {
  csv::Reader reader(path);
  const auto c_index = reader.require("request_index");
  const auto c_t = reader.require("t");
  const auto c_user = reader.require("user_id");
  const auto c_content = reader.require("content_id");
  const auto c_ts = reader.require("timestamp");
  const auto c_hit = reader.require("hit");
  const auto c_admitted = reader.require("admitted");
  const auto c_evicted = reader.require("evicted_id");
  const auto c_p = reader.require("p_hat");
  auto flag = [&](std::size_t col, std::size_t line) {
    const auto v = csv::parse_number<int>(reader.field(col), line, "flag");
    if (v != 0 && v != 1) throw ParseError("flag must be 0 or 1", line);
    return v == 1;
  };
  std::vector<DecisionRecord> out;
  while (reader.next()) {
    const auto line = reader.line();
    DecisionRecord r;
    r.request_index = csv::parse_number<std::size_t>(reader.field(c_index), line, "request index");
    r.period = csv::parse_number<int>(reader.field(c_t), line, "period");
    r.user = UserId{csv::parse_number<std::int64_t>(reader.field(c_user), line, "user id")};
    r.content = ContentId{csv::parse_number<std::int64_t>(reader.field(c_content), line, "content id")};
    r.timestamp = csv::parse_number<Timestamp>(reader.field(c_ts), line, "timestamp");
    r.hit = flag(c_hit, line);
    r.admitted = flag(c_admitted, line);
    if (!reader.field(c_evicted).empty()) {
      r.evicted = ContentId{csv::parse_number<std::int64_t>(reader.field(c_evicted), line, "evicted id")};
    }
    if (!reader.field(c_p).empty()) r.p_hat = csv::parse_number<double>(reader.field(c_p), line, "p_hat");
    out.push_back(r);
  }
  return out;
}

ClassicPolicy::ClassicPolicy(PolicyKind kind, std::size_t capacity, bool lfu_period_scoped)
    : kind_(kind), capacity_(capacity), lfu_period_scoped_(lfu_period_scoped) {
  if (kind != PolicyKind::Fifo && kind != PolicyKind::Lru && kind != PolicyKind::Lfu) {
    throw ConfigError("classic policy must be FIFO, LRU or LFU");
  }
  if (capacity == 0) throw ConfigError("cache capacity must be at least 1");
}

ClassicPolicy::Key ClassicPolicy::key_of(ContentId id, const Slot& s) const {
  switch (kind_) {
    case PolicyKind::Fifo: return {s.inserted, 0, to_int(id)};
    case PolicyKind::Lru: return {s.last_used, 0, to_int(id)};
    default: return {s.count, s.inserted, to_int(id)};
  }
}

void ClassicPolicy::begin_period(const TracePeriod&) {
  if (kind_ != PolicyKind::Lfu || !lfu_period_scoped_) return;
  order_.clear();
  for (auto& [id, slot] : slots_) {
    slot.count = 0;
    order_.insert(key_of(id, slot));
  }
}

PolicyDecision ClassicPolicy::on_request(const Request& request) {
  ++clock_;
  PolicyDecision d;
  if (auto it = slots_.find(request.content); it != slots_.end()) {
    order_.erase(key_of(it->first, it->second));
    it->second.last_used = clock_;
    it->second.count += 1;
    order_.insert(key_of(it->first, it->second));
    d.hit = true;
    return d;
  }
  if (slots_.size() >= capacity_) {
    const auto victim = ContentId{std::get<2>(*order_.begin())};
    order_.erase(order_.begin());
    slots_.erase(victim);
    d.evicted = victim;
  }
  const Slot slot{clock_, clock_, 1};
  slots_.emplace(request.content, slot);
  order_.insert(key_of(request.content, slot));
  d.admitted = true;
  return d;
}

std::vector<ContentId> ClassicPolicy::cached() const {
  std::vector<ContentId> out;
  out.reserve(slots_.size());
  for (const auto& [id, slot] : slots_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

std::int64_t ClassicPolicy::count(ContentId content) const {
  auto it = slots_.find(content);
  return it == slots_.end() ? 0 : it->second.count;
}

std::vector<ContentId> optimal_per_period(const TracePeriod& period, std::size_t capacity) {
  const auto stats = compute_period_stats(period);
  std::vector<std::pair<std::size_t, ContentId>> ranked;
  ranked.reserve(stats.requesting_users.size());
  for (const auto& [id, users] : stats.requesting_users) ranked.emplace_back(users, id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<ContentId> out;
  for (std::size_t i = 0; i < ranked.size() && i < capacity; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

OptimalPolicy::OptimalPolicy(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("cache capacity must be at least 1");
}

void OptimalPolicy::begin_period(const TracePeriod& period) {
  const auto top = optimal_per_period(period, capacity_);
  current_ = std::unordered_set<ContentId>(top.begin(), top.end());
}

PolicyDecision OptimalPolicy::on_request(const Request& request) {
  PolicyDecision d;
  d.hit = current_.contains(request.content);
  return d;
}

std::vector<ContentId> OptimalPolicy::cached() const {
  std::vector<ContentId> out(current_.begin(), current_.end());
  std::sort(out.begin(), out.end());
  return out;
}

ProposedPolicy::ProposedPolicy(std::size_t capacity, ProposedOptions options)
    : options_(options),
      cache_(capacity),
      models_(options.dimension, options.hp, options.gamma),
      rng_(options.seed) {
  if (options.dimension == 0) throw ConfigError("feature dimension must be positive");
  if (options.n_neg < 0) throw ConfigError("n_neg must be non-negative");
}

void ProposedPolicy::begin_period(const TracePeriod& period) {
  active_ = period.active_users;
}

void ProposedPolicy::remember_content(const Request& request) {
  if (request.features.size() != options_.dimension) {
    throw DimensionError(fmt::format("request features have dimension {}, expected {}",
                                     request.features.size(), options_.dimension));
  }
  if (features_.emplace(request.content, request.features).second) {
    library_.push_back(request.content);
  }
}

std::optional<ContentId> ProposedPolicy::draw_negative(UserId user) {
  const auto seen = histories_.size(user);
  if (seen >= library_.size()) return std::nullopt;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const auto id = library_[rng_.below(library_.size())];
    if (!histories_.contains(user, id)) return id;
  }
  std::vector<ContentId> candidates;
  for (auto id : library_) {
    if (!histories_.contains(user, id)) candidates.push_back(id);
  }
  return candidates[rng_.below(candidates.size())];
}

std::vector<Sample> ProposedPolicy::make_samples(const Request& request) {
  std::vector<Sample> samples;
  samples.push_back({request.features, 1});
  for (int i = 0; i < options_.n_neg; ++i) {
    auto neg = draw_negative(request.user);
    if (!neg) break;
    samples.push_back({features_.at(*neg), 0});
  }
  return samples;
}

void ProposedPolicy::track(UserId user, const PreferenceModel& model, const Sample& sample) {
  const double residual = std::abs(predict_prob(model, sample.x) - sample.y);
  double norm2 = 0.0;
  for (double v : sample.x) norm2 += v * v;
  max_gradient_norm_ = std::max(max_gradient_norm_, residual * std::sqrt(norm2));
  ++samples_;

  auto& t = tracks_[user];
  if (t.lo.empty()) {
    t.lo = model.w;
    t.hi = model.w;
  }
  t.samples.push_back(sample);
}

void ProposedPolicy::warm_start(std::span<const Request> history) {
  for (const auto& r : history) {
    remember_content(r);
    if (!histories_.insert(r.user, r.content)) continue;
    auto& model = models_.get_or_create(r.user);
    for (const auto& s : make_samples(r)) {
      track(r.user, model, s);
      ftrl_update(model, s);
      auto& t = tracks_[r.user];
      for (std::size_t n = 0; n < model.w.size(); ++n) {
        t.lo[n] = std::min(t.lo[n], model.w[n]);
        t.hi[n] = std::max(t.hi[n], model.w[n]);
      }
    }
  }
}

PolicyDecision ProposedPolicy::on_request(const Request& request) {
  remember_content(request);
  const std::size_t users = active_.size();
  const bool fresh = !histories_.contains(request.user, request.content);

  PolicyDecision d;
  const double p_hat =
      predict_p_hat(request.features, request.content, active_, models_, histories_);
  d.p_hat = p_hat;
  if (cache_.lookup(request.content)) {
    d.hit = true;
    cache_.on_hit(request.content, users, request.user, histories_);
  } else {
    const auto outcome = cache_.admit_or_reject(request.content, p_hat, request.timestamp, users, fresh);
    d.admitted = outcome.admitted();
    d.evicted = outcome.evicted;
    histories_.insert(request.user, request.content);
  }

  if (fresh) {
    auto& model = models_.get_or_create(request.user);
    for (const auto& s : make_samples(request)) {
      track(request.user, model, s);
      if (observe_and_maybe_retrain(model, s, options_.retrain)) {
        ++retrains_;
        auto& t = tracks_[request.user];
        for (std::size_t n = 0; n < model.w.size(); ++n) {
          t.lo[n] = std::min(t.lo[n], model.w[n]);
          t.hi[n] = std::max(t.hi[n], model.w[n]);
        }
      }
    }
  }
  return d;
}

std::vector<ContentId> ProposedPolicy::cached() const {
  std::vector<ContentId> out;
  for (const auto& e : cache_.entries()) out.push_back(e.id);
  std::sort(out.begin(), out.end());
  return out;
}

LearningDiagnostics ProposedPolicy::diagnostics() const {
  LearningDiagnostics diag;
  diag.samples = samples_;
  diag.retrains = retrains_;
  diag.max_gradient_norm = max_gradient_norm_;
  for (const auto& [user, t] : tracks_) {
    double d2 = 0.0;
    for (std::size_t n = 0; n < t.lo.size(); ++n) d2 += (t.hi[n] - t.lo[n]) * (t.hi[n] - t.lo[n]);
    diag.weight_diameter = std::max(diag.weight_diameter, std::sqrt(d2));
    const auto* model = models_.find(user);
    if (model == nullptr) continue;
    double loss = 0.0;
    for (const auto& s : t.samples) loss += logistic_loss(*model, s.x, s.y);
    diag.residual_loss = std::max(diag.residual_loss, loss);
  }
  return diag;
}

std::unique_ptr<CachePolicy> make_policy(const PolicySpec& spec, std::size_t capacity) {
  switch (spec.kind) {
    case PolicyKind::Fifo:
    case PolicyKind::Lru:
    case PolicyKind::Lfu:
      return std::make_unique<ClassicPolicy>(spec.kind, capacity, spec.lfu_period_scoped);
    case PolicyKind::Optimal:
      return std::make_unique<OptimalPolicy>(capacity);
    case PolicyKind::Proposed:
      return std::make_unique<ProposedPolicy>(capacity, spec.proposed);
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace edgecache
