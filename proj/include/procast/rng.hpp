#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace procast {

// mt19937_64 output is standard-defined; the mappings below avoid
// std::uniform_*_distribution and std::shuffle, whose results are
// implementation-defined and would break cross-platform reproducibility.

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
inline void fisher_yates_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace procast
