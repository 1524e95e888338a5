#pragma once

#include <cstdint>
#include <functional>
#include <utility>

namespace edgecache {

struct PairHash {
  template <typename A, typename B>
  std::size_t operator()(const std::pair<A, B>& p) const noexcept {
    const auto a = static_cast<std::uint64_t>(std::hash<A>{}(p.first));
    const auto b = static_cast<std::uint64_t>(std::hash<B>{}(p.second));
    return static_cast<std::size_t>(a * 0x9E3779B97F4A7C15ull ^ (b + (a << 6) + (a >> 2)));
  }
};

}  // namespace edgecache
