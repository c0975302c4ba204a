#pragma once

#include <cstdint>
#include <vector>

namespace blv {

// Binary observation vector: which of the N cells fired within one time bin.
struct SpikeWord {
  std::vector<std::uint8_t> bits;

  SpikeWord() = default;
  explicit SpikeWord(int n) : bits(static_cast<std::size_t>(n), 0) {}

  int size() const { return static_cast<int>(bits.size()); }

  int count() const {
    int c = 0;
    for (auto b : bits) c += b != 0;
    return c;
  }

  bool operator==(const SpikeWord&) const = default;
};

// Binary latent state: which of the M latent units are active.
struct LatentVector {
  std::vector<std::uint8_t> bits;

  LatentVector() = default;
  explicit LatentVector(int m) : bits(static_cast<std::size_t>(m), 0) {}

  int size() const { return static_cast<int>(bits.size()); }

  // |z|, the number of active latent units
  int cardinality() const {
    int c = 0;
    for (auto b : bits) c += b != 0;
    return c;
  }

  bool operator==(const LatentVector&) const = default;
};

inline LatentVector one_hot_latent(int m, int a) {
  LatentVector z(m);
  z.bits[static_cast<std::size_t>(a)] = 1;
  return z;
}

using Corpus = std::vector<SpikeWord>;

}  // namespace blv
