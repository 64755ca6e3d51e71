#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace hndr {

/// Seeded generator whose output does not depend on the standard library's
/// distribution implementations, so draws are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent substream keyed by name. Adding a new stream name never
  /// changes the draws of an existing one.
  static Rng derive(std::uint64_t seed, std::string_view stream);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hndr
