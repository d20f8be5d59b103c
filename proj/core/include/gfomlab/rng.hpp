#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace gfom {

// Stateless 64-bit mixer (SplitMix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a child key from a parent key and a path of indices. The scheme is
// hierarchical: derive(derive(s, a), b) == derive(s, {a, b}).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept;
std::uint64_t derive_seed(std::uint64_t parent,
                          std::initializer_list<std::uint64_t> path) noexcept;
// Stable tag for a named stream ("ensemble", "se", "replicate", ...).
std::uint64_t stream_tag(std::string_view name) noexcept;

// Counter-based generator: the k-th output is mix64(key ^ f(k)), so any
// position of any stream is addressable without sequential state.
// Satisfies UniformRandomBitGenerator.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  explicit CounterEngine(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(mix64(key)), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return mix64(key_ + 0x632be59bd9b4e019ULL * (++counter_));
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Uniform double in (0, 1) built from the top 53 bits.
inline double uniform_open01(CounterEngine& eng) noexcept {
  return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace gfom
