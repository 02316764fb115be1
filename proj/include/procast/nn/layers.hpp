#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "procast/nn/cells.hpp"
#include "procast/nn/common.hpp"
#include "procast/nn/parameter.hpp"

namespace procast::nn {

enum class CellKind { LSTM, TLSTM };
enum class Mode { Train, Infer };

// One batch of left-padded sequences, laid out step-major: x[t] holds the
// feature column of every example at time t. mask[t] is 1 for real steps,
// 0 for padding; first_real_step is the earliest t with any real column
// (state is zero before it, so the recurrence starts there).
struct SequenceBatch {
  std::vector<Matrix> x;
  std::vector<RowVector> delta;
  std::vector<RowVector> mask;
  int first_real_step = 0;

  int steps() const { return static_cast<int>(x.size()); }
  Eigen::Index cols() const { return x.empty() ? 0 : x[0].cols(); }
};

struct RecurrentCache {
  std::vector<LSTMStepCache> step;  // valid from t0 onward
  std::vector<Matrix> h;            // post-mask h per step, from t0
  std::vector<Matrix> c;            // post-mask c per step, from t0
  std::vector<RowVector> mask;
  int t0 = 0;
  int steps = 0;
};

// Recurrent layer over a masked batch. Padded steps copy h and c through
// unchanged, so leading padding never influences the result.
struct RecurrentLayer {
  CellKind kind = CellKind::LSTM;
  TLSTMCellParams cell;  // W_d/b_d unused for the vanilla kind

  void init(Eigen::Index hidden, Eigen::Index input, std::mt19937_64& rng,
            const std::string& prefix) {
    if (kind == CellKind::TLSTM) {
      cell.init(hidden, input, rng, prefix);
    } else {
      cell.base.init(hidden, input, rng, prefix);
      cell.W_d = Parameter(prefix + ".W_d", Matrix::Zero(hidden, hidden));
      cell.b_d = Parameter(prefix + ".b_d", Matrix::Zero(hidden, 1));
    }
  }

  std::vector<Parameter*> params() {
    return kind == CellKind::TLSTM ? cell.params() : cell.base.params();
  }

  Eigen::Index hidden() const { return cell.base.hidden(); }

  // Returns post-mask hidden states for t0..k_max-1 in cache.h; the final
  // entry is the last real hidden state of every column.
  void forward(const SequenceBatch& batch, RecurrentCache& cache) {
    const int k = batch.steps();
    const Eigen::Index B = batch.cols();
    const Eigen::Index H = hidden();
    if (k == 0 || B == 0) throw UsageError("recurrent layer needs a non-empty batch");
    bool any_real = false;
    for (const auto& m : batch.mask)
      if (m.sum() > 0) any_real = true;
    if (!any_real) throw UsageError("recurrent layer input is entirely padding");

    cache.t0 = batch.first_real_step;
    cache.steps = k;
    cache.step.assign(k, {});
    cache.h.assign(k, {});
    cache.c.assign(k, {});
    cache.mask = batch.mask;

    Matrix h = Matrix::Zero(H, B);
    Matrix c = Matrix::Zero(H, B);
    for (int t = cache.t0; t < k; ++t) {
      Matrix h_new, c_new;
      if (kind == CellKind::TLSTM)
        tlstm_cell_forward(cell, batch.x[t], h, c, batch.delta[t], cache.step[t], h_new, c_new);
      else
        lstm_cell_forward(cell.base, batch.x[t], h, c, cache.step[t], h_new, c_new);
      const auto m = batch.mask[t].array();
      h = (h_new.array().rowwise() * m + h.array().rowwise() * (1.0 - m)).matrix();
      c = (c_new.array().rowwise() * m + c.array().rowwise() * (1.0 - m)).matrix();
      cache.h[t] = h;
      cache.c[t] = c;
    }
  }

  // dh_seq[t] holds upstream gradients w.r.t. the post-mask h at step t (zero
  // matrices where unused; a final-state head fills only the last step).
  // Returns dx per step via out_dx when non-null.
  void backward(const RecurrentCache& cache, const std::vector<Matrix>& dh_seq,
                std::vector<Matrix>* out_dx) {
    const int k = cache.steps;
    const Eigen::Index H = hidden();
    const Eigen::Index B = cache.h[k - 1].cols();
    Matrix dh_carry = Matrix::Zero(H, B);
    Matrix dc_carry = Matrix::Zero(H, B);
    if (out_dx) out_dx->assign(k, Matrix());
    Parameter* wd = kind == CellKind::TLSTM ? &cell.W_d : nullptr;
    Parameter* bd = kind == CellKind::TLSTM ? &cell.b_d : nullptr;
    for (int t = k - 1; t >= cache.t0; --t) {
      Matrix dh = dh_carry;
      if (t < static_cast<int>(dh_seq.size()) && dh_seq[t].size() > 0) dh += dh_seq[t];
      const auto m = cache.mask[t].array();
      // The mask selected h_new where real and h_prev where padded; split the
      // incoming gradient the same way.
      const Matrix dh_new = (dh.array().rowwise() * m).matrix();
      const Matrix dc_new = (dc_carry.array().rowwise() * m).matrix();
      Matrix dh_pad = (dh.array().rowwise() * (1.0 - m)).matrix();
      Matrix dc_pad = (dc_carry.array().rowwise() * (1.0 - m)).matrix();
      Matrix dx, dh_prev, dc_prev;
      lstm_cell_backward(cell.base, wd, bd, cache.step[t], dh_new, dc_new, dx, dh_prev, dc_prev);
      if (out_dx) (*out_dx)[t] = (dx.array().rowwise() * m).matrix();
      dh_carry = dh_prev + dh_pad;
      dc_carry = dc_prev + dc_pad;
    }
  }
};

struct BatchNormCache {
  Matrix x_hat;
  Matrix mean;     // (H,1) batch mean
  Matrix var;      // (H,1) biased batch variance
  Matrix inv_std;  // (H,1)
  Eigen::Index count = 0;
  Mode mode = Mode::Train;
};

// Per-feature batch normalization over the columns of a (H, M) matrix. The
// forward pass is pure; moving statistics advance only through
// update_moving_stats, so a gradient check can re-run forward freely.
struct BatchNorm {
  Parameter gamma;
  Parameter beta;
  Matrix moving_mean;
  Matrix moving_var;
  double momentum = 0.99;
  double epsilon = 1e-3;

  void init(Eigen::Index width, const std::string& prefix) {
    gamma = Parameter(prefix + ".gamma", Matrix::Ones(width, 1));
    beta = Parameter(prefix + ".beta", Matrix::Zero(width, 1));
    moving_mean = Matrix::Zero(width, 1);
    moving_var = Matrix::Ones(width, 1);
  }

  std::vector<Parameter*> params() { return {&gamma, &beta}; }

  Matrix forward(const Matrix& x, Mode mode, BatchNormCache& cache) const {
    cache.mode = mode;
    cache.count = x.cols();
    if (mode == Mode::Train) {
      if (x.cols() < 2)
        throw UsageError("batch normalization needs at least 2 examples in train mode");
      cache.mean = x.rowwise().mean();
      const Matrix centered = x.colwise() - cache.mean.col(0);
      cache.var = centered.array().square().matrix().rowwise().mean();
      cache.inv_std = (cache.var.array() + epsilon).rsqrt().matrix();
      cache.x_hat = centered.array().colwise() * cache.inv_std.col(0).array();
    } else {
      cache.inv_std = (moving_var.array() + epsilon).rsqrt().matrix();
      cache.x_hat = (x.colwise() - moving_mean.col(0)).array().colwise() *
                    cache.inv_std.col(0).array();
    }
    return (cache.x_hat.array().colwise() * gamma.value.col(0).array()).matrix().colwise() +
           beta.value.col(0);
  }

  void update_moving_stats(const BatchNormCache& cache) {
    moving_mean = momentum * moving_mean + (1.0 - momentum) * cache.mean;
    moving_var = momentum * moving_var + (1.0 - momentum) * cache.var;
  }

  Matrix backward(const BatchNormCache& cache, const Matrix& dy) {
    gamma.grad.noalias() += dy.cwiseProduct(cache.x_hat).rowwise().sum();
    beta.grad.noalias() += dy.rowwise().sum();
    const Matrix dx_hat = dy.array().colwise() * gamma.value.col(0).array();
    if (cache.mode == Mode::Infer)
      return (dx_hat.array().colwise() * cache.inv_std.col(0).array()).matrix();
    const double m = static_cast<double>(cache.count);
    const Matrix sum_dx_hat = dx_hat.rowwise().sum();
    const Matrix sum_dx_hat_xhat = dx_hat.cwiseProduct(cache.x_hat).rowwise().sum();
    Matrix dx = m * dx_hat;
    dx.colwise() -= sum_dx_hat.col(0);
    dx -= (cache.x_hat.array().colwise() * sum_dx_hat_xhat.col(0).array()).matrix();
    return (dx.array().colwise() * (cache.inv_std.col(0).array() / m)).matrix();
  }
};

struct DropoutCache {
  Matrix mask;  // survivor scaling, already divided by keep probability
  bool active = false;
};

// Inverted dropout: survivors are scaled by 1/(1-rate) so inference is the
// identity.
struct Dropout {
  double rate = 0.0;

  Matrix forward(const Matrix& x, Mode mode, std::mt19937_64& rng, DropoutCache& cache) const {
    if (mode == Mode::Infer || rate == 0.0) {
      cache.active = false;
      return x;
    }
    cache.active = true;
    cache.mask.resize(x.rows(), x.cols());
    const double keep = 1.0 - rate;
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      for (Eigen::Index r = 0; r < x.rows(); ++r)
        cache.mask(r, c) = uniform01(rng) < rate ? 0.0 : 1.0 / keep;
    return x.cwiseProduct(cache.mask);
  }

  Matrix backward(const DropoutCache& cache, const Matrix& dy) const {
    return cache.active ? dy.cwiseProduct(cache.mask).eval() : dy;
  }
};

struct DenseCache {
  Matrix x;
};

struct Dense {
  Parameter W;
  Parameter b;

  void init(Eigen::Index out, Eigen::Index in, std::mt19937_64& rng, const std::string& prefix) {
    W = Parameter(prefix + ".W", glorot_uniform(out, in, rng));
    b = Parameter(prefix + ".b", Matrix::Zero(out, 1));
  }

  std::vector<Parameter*> params() { return {&W, &b}; }

  Matrix forward(const Matrix& x, DenseCache& cache) const {
    cache.x = x;
    Matrix y = (W.value * x).colwise() + b.value.col(0);
    check_finite(y, "dense output");
    return y;
  }

  Matrix backward(const DenseCache& cache, const Matrix& dy) {
    W.grad.noalias() += dy * cache.x.transpose();
    b.grad.noalias() += dy.rowwise().sum();
    return W.value.transpose() * dy;
  }
};

// Column-wise softmax, numerically stabilized by the per-column max.
inline Matrix softmax(const Matrix& logits) {
  Matrix shifted = logits.rowwise() - logits.colwise().maxCoeff();
  Matrix e = shifted.array().exp();
  RowVector sums = e.colwise().sum();
  Matrix probs = e.array().rowwise() / sums.array();
  check_finite(probs, "softmax output");
  return probs;
}

}  // namespace procast::nn
