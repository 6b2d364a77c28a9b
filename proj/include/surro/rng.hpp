#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace surro {

// Counter-based generator (Philox4x32-10). A source is identified by
// (seed, stream_id) and a draw counter, so the n-th draw of a stream is a pure
// function of those three numbers. Sub-streams (per unit, per bootstrap
// replicate, per tree) are derived by hashing the parent stream id with an
// index, which makes per-unit sampling independent of iteration order.
class RandomSource {
 public:
  using result_type = std::uint64_t;

  RandomSource(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  RandomSource substream(std::uint64_t index) const noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform on (0, 1).
  double uniform_open() noexcept;
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }
  bool bernoulli(double p) noexcept { return uniform() < p; }
  // Uniform on {0, ..., n-1}; n must be positive.
  std::size_t uniform_index(std::size_t n) noexcept;

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

RandomSource make_rng(std::uint64_t seed, std::uint64_t stream_id);

// SplitMix64 finalizer; exposed for deriving stream ids from labels.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace surro
