#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace ird {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t s = a ^ (b * 0xd1b54a32d192ed03ULL);
  splitmix64(s);
  return splitmix64(s);
}

}  // namespace detail

/// A reproducible random stream identified by (seed, stream_id).
///
/// Identical pairs give identical sequences. Child streams are derived by
/// hashing the parent identity, so a tree of streams (study -> replicate ->
/// case) never depends on how much randomness a sibling consumed.
/// Satisfies UniformRandomBitGenerator, so std:: distributions accept it.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::uint64_t state = detail::mix(seed, stream_id);
    std::array<std::uint32_t, 8> words{};
    for (std::size_t k = 0; k < words.size(); k += 2) {
      const std::uint64_t v = detail::splitmix64(state);
      words[k] = static_cast<std::uint32_t>(v);
      words[k + 1] = static_cast<std::uint32_t>(v >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  RngStream derive(std::uint64_t child) const {
    return RngStream(detail::mix(seed_, stream_id_ + 0x632be59bd9b4e019ULL), child);
  }

  static constexpr result_type min() noexcept { return std::mt19937_64::min(); }
  static constexpr result_type max() noexcept { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(*this); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace ird
