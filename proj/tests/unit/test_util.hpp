#pragma once

#include <cstdint>

#include "arr/numerics/rng.hpp"
#include "arr/numerics/tensor.hpp"

namespace arr::testing {

inline Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = scale * standard_normal(rng);
  return t;
}

inline std::size_t random_dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + uniform_index(rng, hi - lo + 1);
}

}  // namespace arr::testing
