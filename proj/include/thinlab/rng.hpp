#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace thinlab {

using bin_t = std::uint32_t;

/// Finalizer from SplitMix64 (Stafford variant 13). A bijection on 64-bit
/// words with full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// Derives the seed of sub-stream `index` from `base`. Injective in `index`
/// for a fixed base, so per-trial seeds never collide.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix64(base + index * kGolden);
}

/// Deterministic stream of uniform bin draws.
///
/// State transition is SplitMix64: `state += 0x9e3779b97f4a7c15`, output is
/// `mix64(state)`. Bins are drawn with Lemire's multiply-shift reduction plus
/// rejection of the biased low region, so every bin in [0, n) is exactly
/// equiprobable. The whole sequence depends only on the seed, never on the
/// platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) noexcept : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  /// Bins drawn so far (not raw words; rejected words are not counted).
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_word() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform draw on [0, n), 0-based. Requires n >= 1.
  bin_t draw(bin_t n) noexcept {
    std::uint64_t x = next_word();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
      while (low < threshold) {
        x = next_word();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    ++counter_;
    return static_cast<bin_t>(m >> 64);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
};

/// Replays a fixed list of 0-based bins. Used by the enumeration oracle and by
/// tests that need to force particular draws.
class ScriptedStream {
 public:
  ScriptedStream() = default;
  explicit ScriptedStream(std::vector<bin_t> bins) : bins_(std::move(bins)) {}

  std::uint64_t counter() const noexcept { return pos_; }

  bin_t draw(bin_t /*n*/) {
    if (pos_ >= bins_.size()) throw std::out_of_range("scripted stream exhausted");
    return bins_[pos_++];
  }

  void reset(std::span<const bin_t> bins) {
    bins_.assign(bins.begin(), bins.end());
    pos_ = 0;
  }

 private:
  std::vector<bin_t> bins_;
  std::size_t pos_ = 0;
};

template <typename S>
concept BinStream = requires(S s, bin_t n) {
  { s.draw(n) } -> std::convertible_to<bin_t>;
  { s.counter() } -> std::convertible_to<std::uint64_t>;
};

/// Seeds of the primary (Z⁰) and secondary (Z¹) streams for a run seed.
struct StreamSeeds {
  std::uint64_t primary;
  std::uint64_t secondary;
};

constexpr StreamSeeds stream_seeds(std::uint64_t run_seed) noexcept {
  return {derive_seed(run_seed, 0), derive_seed(run_seed, 1)};
}

}  // namespace thinlab
