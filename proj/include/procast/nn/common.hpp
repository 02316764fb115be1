#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>

#include "procast/errors.hpp"
#include "procast/rng.hpp"

namespace procast::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline Matrix sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

inline void check_finite(const Matrix& m, const std::string& name) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + name);
}

// Glorot-uniform for a (fan_out x fan_in) matrix; draws are row-major so the
// stream of random numbers is independent of Eigen's storage order.
inline Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

}  // namespace procast::nn
