#pragma once

#include <string>
#include <utility>
#include <vector>

#include "procast/nn/common.hpp"

namespace procast::nn {

// One trainable tensor plus its gradient and the optimizer's moment slots.
// All four stay shape-locked for the parameter's lifetime.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;

  Parameter() = default;
  Parameter(std::string n, Matrix init) : name(std::move(n)), value(std::move(init)) {
    grad = Matrix::Zero(value.rows(), value.cols());
    m = grad;
    v = grad;
  }

  void zero_grad() { grad.setZero(); }
};

inline void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace procast::nn
