#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace langdepth {

struct RngSeed {
  std::uint64_t value = 0;
  friend bool operator==(RngSeed, RngSeed) = default;
};

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so all
/// conversions to floating point and bounded integers are done here:
///   uniform01()      = (x >> 11) * 2^-53, a double in [0, 1)
///   uniform01_f32()  = (x >> 40) * 2^-24, a float in [0, 1)
///   below(n)         = rejection sampling on the top bits, uniform in [0, n)
/// Results therefore reproduce bit-exactly across platforms and compilers.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  std::uint64_t next() { return engine_(); }
  double uniform01();
  float uniform01_f32();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace langdepth
