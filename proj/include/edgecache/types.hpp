#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace edgecache {

enum class UserId : std::int64_t {};
enum class ContentId : std::int64_t {};

/// Seconds since the Unix epoch.
using Timestamp = std::int64_t;

constexpr std::int64_t to_int(UserId id) noexcept { return static_cast<std::int64_t>(id); }
constexpr std::int64_t to_int(ContentId id) noexcept { return static_cast<std::int64_t>(id); }

/// Immutable dense feature vector with components in [0, 1].
///
/// Copies share the underlying storage, so a request stream can carry one
/// vector per request without duplicating the catalog.
class FeatureVector {
 public:
  FeatureVector() : values_(std::make_shared<const std::vector<double>>()) {}
  explicit FeatureVector(std::vector<double> values)
      : values_(std::make_shared<const std::vector<double>>(std::move(values))) {}

  std::size_t size() const noexcept { return values_->size(); }
  bool empty() const noexcept { return values_->empty(); }
  double operator[](std::size_t i) const { return (*values_)[i]; }
  std::span<const double> values() const noexcept { return *values_; }
  operator std::span<const double>() const noexcept { return *values_; }

  auto begin() const noexcept { return values_->begin(); }
  auto end() const noexcept { return values_->end(); }

  friend bool operator==(const FeatureVector& a, const FeatureVector& b) {
    return a.values_ == b.values_ || *a.values_ == *b.values_;
  }

 private:
  std::shared_ptr<const std::vector<double>> values_;
};

/// One content request event.
struct Request {
  UserId user{};
  ContentId content{};
  Timestamp timestamp = 0;
  FeatureVector features;
  /// Set when the same (user, content) pair already occurred earlier in the trace.
  bool repeat = false;

  friend bool operator==(const Request&, const Request&) = default;
};

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace edgecache
