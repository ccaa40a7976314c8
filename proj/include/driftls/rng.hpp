#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace driftls {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based generator: the k-th output is a pure function of (key, k),
// so streams can be split deterministically and replayed from any offset.
// All distribution code lives here so results do not depend on the
// standard library's (implementation-defined) distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_(derive(seed, stream)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept {
    return detail::mix64(key_ + (++counter_) * detail::kGolden);
  }

  // Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const noexcept {
    Rng child;
    child.key_ = derive(key_, stream);
    return child;
  }

  std::uint64_t counter() const noexcept { return counter_; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01();
  }

  // Unbiased uniform integer on [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept {
    // Lemire's multiply-and-reject.
    auto m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double normal() noexcept {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) noexcept { return uniform01() < p; }

  double rademacher() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }

 private:
  static constexpr std::uint64_t derive(std::uint64_t a, std::uint64_t b) noexcept {
    return detail::mix64(detail::mix64(a + detail::kGolden) ^ (b * 0xd1342543de82ef95ULL + 1));
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace driftls
