#pragma once

#include <array>
#include <cstdint>

namespace pfm {

// Philox4x32-10 counter-based generator (Salmon et al., Random123). Every
// draw is a pure function of (key, counter), so a stream indexed by voxel or
// sample number gives the same values regardless of evaluation order or
// thread count.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

// Seeded stream of variates addressed by (stream, index). Stream ids keep
// independent uses of one seed (noise, defects, shuffles) apart.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  PhiloxCounter block(std::uint64_t index) const;

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform(std::uint64_t index) const;

  // Standard normal via Box-Muller on the two 64-bit halves of one block.
  double normal(std::uint64_t index) const;

  std::uint64_t bits64(std::uint64_t index) const;

 private:
  PhiloxKey key_;
  std::uint64_t stream_;
};

}  // namespace pfm
