#pragma once

#include <cmath>
#include <vector>

#include "procast/encoding.hpp"
#include "procast/nn/common.hpp"

namespace procast::nn {

// Class-weighted cross entropy over softmax probabilities (K, B). Returns the
// mean weighted loss and writes the gradient w.r.t. the pre-softmax logits
// via the fused softmax-CE derivative: w_y/B * (p - onehot).
inline double weighted_cross_entropy(const Matrix& probs, const std::vector<int>& targets,
                                     const ClassWeights& weights, Matrix* dlogits = nullptr) {
  const Eigen::Index B = probs.cols();
  const Eigen::Index K = probs.rows();
  if (static_cast<Eigen::Index>(targets.size()) != B)
    throw UsageError("cross entropy: batch size mismatch");
  if (static_cast<Eigen::Index>(weights.weight.size()) != K)
    throw UsageError("cross entropy: class weight count mismatch");
  if (B == 0) throw UsageError("cross entropy: empty batch");
  double loss = 0.0;
  if (dlogits) dlogits->setZero(K, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const int y = targets[static_cast<std::size_t>(b)];
    if (y < 0 || y >= K) throw UsageError("cross entropy: target index out of range");
    const double w = weights.weight[static_cast<std::size_t>(y)];
    const double p = std::min(1.0, std::max(probs(y, b), 1e-12));
    loss += w * -std::log(p);
    if (dlogits) {
      const double scale = w / static_cast<double>(B);
      for (Eigen::Index k = 0; k < K; ++k) (*dlogits)(k, b) = scale * probs(k, b);
      (*dlogits)(y, b) -= scale;
    }
  }
  return loss / static_cast<double>(B);
}

inline ClassWeights unit_weights(int num_classes) {
  ClassWeights w;
  w.weight.assign(static_cast<std::size_t>(num_classes), 1.0);
  return w;
}

// Mean absolute error over (1, B) rows; the subgradient at zero error is 0.
inline double mae_loss(const Matrix& pred, const Matrix& target, Matrix* dpred = nullptr) {
  if (pred.rows() != 1 || target.rows() != 1 || pred.cols() != target.cols())
    throw UsageError("mae: predictions and targets must be (1, B) with equal B");
  const Eigen::Index B = pred.cols();
  if (B == 0) throw UsageError("mae: empty batch");
  double loss = 0.0;
  if (dpred) dpred->setZero(1, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double d = pred(0, b) - target(0, b);
    loss += std::abs(d);
    if (dpred) (*dpred)(0, b) = (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) / static_cast<double>(B);
  }
  return loss / static_cast<double>(B);
}

}  // namespace procast::nn
