#pragma once

#include <cmath>
#include <vector>

#include "procast/nn/common.hpp"
#include "procast/nn/parameter.hpp"

namespace procast::nn {

// Nesterov-accelerated Adam, Dozat formulation. The update blends the
// bias-corrected momentum looking one step ahead (1 - beta1^(t+1)) with the
// current gradient's own correction.
struct Nadam {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;

  void step(const std::vector<Parameter*>& params, long t) const {
    if (t < 1) throw UsageError("optimizer step index must be >= 1");
    const double b1t = std::pow(beta1, static_cast<double>(t));
    const double b1t1 = std::pow(beta1, static_cast<double>(t + 1));
    const double b2t = std::pow(beta2, static_cast<double>(t));
    for (Parameter* p : params) {
      if (!p->grad.allFinite()) throw NumericError("non-finite gradient in " + p->name);
      p->m = beta1 * p->m + (1.0 - beta1) * p->grad;
      p->v = beta2 * p->v.array() + (1.0 - beta2) * p->grad.array().square();
      const auto m_hat = p->m.array() / (1.0 - b1t1);
      const auto v_hat = p->v.array() / (1.0 - b2t);
      p->value.array() -=
          lr * (beta1 * m_hat + (1.0 - beta1) * p->grad.array() / (1.0 - b1t)) /
          (v_hat.sqrt() + eps);
    }
  }
};

}  // namespace procast::nn
