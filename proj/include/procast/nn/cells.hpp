#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "procast/nn/common.hpp"
#include "procast/nn/parameter.hpp"

namespace procast::nn {

// Time decay 1/ln(e + delta), delta in seconds. Written via log1p so that
// decay(0) is exactly 1.0: ln(e + d) = 1 + ln(1 + d/e).
inline double decay(double delta_seconds) {
  if (delta_seconds < 0.0) throw UsageError("decay requires a non-negative elapsed time");
  return 1.0 / (1.0 + std::log1p(delta_seconds / std::exp(1.0)));
}

inline RowVector decay_row(const RowVector& deltas) {
  RowVector out(deltas.size());
  for (Eigen::Index i = 0; i < deltas.size(); ++i) out(i) = decay(deltas(i));
  return out;
}

// Gate parameters: W_* read the input, U_* read the previous hidden state,
// b_* are biases. Forget bias starts at 1, a standard LSTM initialization.
struct LSTMCellParams {
  Parameter W_f, W_i, W_g, W_o;
  Parameter U_f, U_i, U_g, U_o;
  Parameter b_f, b_i, b_g, b_o;

  void init(Eigen::Index hidden, Eigen::Index input, std::mt19937_64& rng,
            const std::string& prefix) {
    W_f = Parameter(prefix + ".W_f", glorot_uniform(hidden, input, rng));
    W_i = Parameter(prefix + ".W_i", glorot_uniform(hidden, input, rng));
    W_g = Parameter(prefix + ".W_g", glorot_uniform(hidden, input, rng));
    W_o = Parameter(prefix + ".W_o", glorot_uniform(hidden, input, rng));
    U_f = Parameter(prefix + ".U_f", glorot_uniform(hidden, hidden, rng));
    U_i = Parameter(prefix + ".U_i", glorot_uniform(hidden, hidden, rng));
    U_g = Parameter(prefix + ".U_g", glorot_uniform(hidden, hidden, rng));
    U_o = Parameter(prefix + ".U_o", glorot_uniform(hidden, hidden, rng));
    b_f = Parameter(prefix + ".b_f", Matrix::Ones(hidden, 1));
    b_i = Parameter(prefix + ".b_i", Matrix::Zero(hidden, 1));
    b_g = Parameter(prefix + ".b_g", Matrix::Zero(hidden, 1));
    b_o = Parameter(prefix + ".b_o", Matrix::Zero(hidden, 1));
  }

  std::vector<Parameter*> params() {
    return {&W_f, &W_i, &W_g, &W_o, &U_f, &U_i, &U_g, &U_o, &b_f, &b_i, &b_g, &b_o};
  }

  Eigen::Index hidden() const { return U_f.value.rows(); }
  Eigen::Index input() const { return W_f.value.cols(); }
};

struct TLSTMCellParams {
  LSTMCellParams base;
  Parameter W_d;
  Parameter b_d;

  void init(Eigen::Index hidden, Eigen::Index input, std::mt19937_64& rng,
            const std::string& prefix) {
    base.init(hidden, input, rng, prefix);
    W_d = Parameter(prefix + ".W_d", glorot_uniform(hidden, hidden, rng));
    b_d = Parameter(prefix + ".b_d", Matrix::Zero(hidden, 1));
  }

  std::vector<Parameter*> params() {
    auto ps = base.params();
    ps.push_back(&W_d);
    ps.push_back(&b_d);
    return ps;
  }
};

// Everything the backward pass needs from one forward step. Columns are
// batch examples.
struct LSTMStepCache {
  Matrix x;       // (n, B)
  Matrix h_prev;  // (H, B)
  Matrix c_prev;  // (H, B), state before any time adjustment
  Matrix c_star;  // adjusted memory fed into the gate update
  Matrix f, i, g, o;
  Matrix c_new;    // pre-mask cell state
  Matrix tanh_c;   // tanh(c_new)
  // T-LSTM intermediates; empty for the vanilla cell.
  bool time_aware = false;
  Matrix c_s;      // tanh(W_d c_prev + b_d)
  RowVector dec;   // decay(delta) per column
};

// Memory decomposition: the short-term part c_S is discounted by decay(delta)
// and recombined with the long-term remainder c_prev - c_S.
inline Matrix tlstm_adjust(const Matrix& c_prev, const RowVector& deltas, const Parameter& W_d,
                           const Parameter& b_d, LSTMStepCache& cache) {
  cache.time_aware = true;
  cache.c_s = ((W_d.value * c_prev).colwise() + b_d.value.col(0)).array().tanh();
  cache.dec = decay_row(deltas);
  Matrix c_hat = cache.c_s.array().rowwise() * cache.dec.array();
  return c_prev - cache.c_s + c_hat;
}

inline Matrix tlstm_adjust(const Matrix& c_prev, double delta, const Parameter& W_d,
                           const Parameter& b_d, LSTMStepCache& cache) {
  RowVector deltas = RowVector::Constant(c_prev.cols(), delta);
  return tlstm_adjust(c_prev, deltas, W_d, b_d, cache);
}

// One gate update over a batch. c_star is c_prev for the vanilla cell or the
// adjusted memory for the time-aware cell; the caller fills the cache fields
// that precede the gates.
inline void lstm_gates_forward(LSTMCellParams& p, const Matrix& x, const Matrix& h_prev,
                               const Matrix& c_star, LSTMStepCache& cache, Matrix& h_out,
                               Matrix& c_out) {
  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_star = c_star;
  cache.f = sigmoid(((p.W_f.value * x + p.U_f.value * h_prev).colwise() + p.b_f.value.col(0)));
  cache.i = sigmoid(((p.W_i.value * x + p.U_i.value * h_prev).colwise() + p.b_i.value.col(0)));
  cache.g = ((p.W_g.value * x + p.U_g.value * h_prev).colwise() + p.b_g.value.col(0)).array().tanh();
  cache.o = sigmoid(((p.W_o.value * x + p.U_o.value * h_prev).colwise() + p.b_o.value.col(0)));
  cache.c_new = cache.f.cwiseProduct(c_star) + cache.i.cwiseProduct(cache.g);
  cache.tanh_c = cache.c_new.array().tanh();
  c_out = cache.c_new;
  h_out = cache.o.cwiseProduct(cache.tanh_c);
}

inline void lstm_cell_forward(LSTMCellParams& p, const Matrix& x, const Matrix& h_prev,
                              const Matrix& c_prev, LSTMStepCache& cache, Matrix& h_out,
                              Matrix& c_out) {
  cache.c_prev = c_prev;
  lstm_gates_forward(p, x, h_prev, c_prev, cache, h_out, c_out);
  check_finite(h_out, "lstm hidden state");
}

inline void tlstm_cell_forward(TLSTMCellParams& p, const Matrix& x, const Matrix& h_prev,
                               const Matrix& c_prev, const RowVector& deltas,
                               LSTMStepCache& cache, Matrix& h_out, Matrix& c_out) {
  cache.c_prev = c_prev;
  const Matrix c_star = tlstm_adjust(c_prev, deltas, p.W_d, p.b_d, cache);
  lstm_gates_forward(p.base, x, h_prev, c_star, cache, h_out, c_out);
  check_finite(h_out, "tlstm hidden state");
}

// Backward through one step. dh/dc are gradients w.r.t. this step's pre-mask
// outputs; parameter gradients accumulate; returns gradients w.r.t. x,
// h_prev, and the original (pre-adjustment) c_prev. W_d/b_d may be null for
// the vanilla cell.
inline void lstm_cell_backward(LSTMCellParams& p, Parameter* W_d, Parameter* b_d,
                               const LSTMStepCache& cache, const Matrix& dh, const Matrix& dc,
                               Matrix& dx, Matrix& dh_prev, Matrix& dc_prev) {
  const Matrix dc_total =
      dc + dh.cwiseProduct(cache.o).cwiseProduct((1.0 - cache.tanh_c.array().square()).matrix());
  const Matrix do_pre = dh.cwiseProduct(cache.tanh_c)
                            .cwiseProduct(cache.o)
                            .cwiseProduct((1.0 - cache.o.array()).matrix());
  const Matrix df_pre = dc_total.cwiseProduct(cache.c_star)
                            .cwiseProduct(cache.f)
                            .cwiseProduct((1.0 - cache.f.array()).matrix());
  const Matrix di_pre = dc_total.cwiseProduct(cache.g)
                            .cwiseProduct(cache.i)
                            .cwiseProduct((1.0 - cache.i.array()).matrix());
  const Matrix dg_pre =
      dc_total.cwiseProduct(cache.i).cwiseProduct((1.0 - cache.g.array().square()).matrix());
  Matrix dc_star = dc_total.cwiseProduct(cache.f);

  p.W_f.grad.noalias() += df_pre * cache.x.transpose();
  p.W_i.grad.noalias() += di_pre * cache.x.transpose();
  p.W_g.grad.noalias() += dg_pre * cache.x.transpose();
  p.W_o.grad.noalias() += do_pre * cache.x.transpose();
  p.U_f.grad.noalias() += df_pre * cache.h_prev.transpose();
  p.U_i.grad.noalias() += di_pre * cache.h_prev.transpose();
  p.U_g.grad.noalias() += dg_pre * cache.h_prev.transpose();
  p.U_o.grad.noalias() += do_pre * cache.h_prev.transpose();
  p.b_f.grad.noalias() += df_pre.rowwise().sum();
  p.b_i.grad.noalias() += di_pre.rowwise().sum();
  p.b_g.grad.noalias() += dg_pre.rowwise().sum();
  p.b_o.grad.noalias() += do_pre.rowwise().sum();

  dx.noalias() = p.W_f.value.transpose() * df_pre;
  dx.noalias() += p.W_i.value.transpose() * di_pre;
  dx.noalias() += p.W_g.value.transpose() * dg_pre;
  dx.noalias() += p.W_o.value.transpose() * do_pre;
  dh_prev.noalias() = p.U_f.value.transpose() * df_pre;
  dh_prev.noalias() += p.U_i.value.transpose() * di_pre;
  dh_prev.noalias() += p.U_g.value.transpose() * dg_pre;
  dh_prev.noalias() += p.U_o.value.transpose() * do_pre;

  if (cache.time_aware) {
    // c_star = c_prev - c_s + c_s * dec, so dc_s = dc_star * (dec - 1).
    const Matrix dc_s =
        dc_star.array().rowwise() * (cache.dec.array() - 1.0);
    const Matrix dpre_d = dc_s.cwiseProduct((1.0 - cache.c_s.array().square()).matrix());
    W_d->grad.noalias() += dpre_d * cache.c_prev.transpose();
    b_d->grad.noalias() += dpre_d.rowwise().sum();
    dc_prev = dc_star + W_d->value.transpose() * dpre_d;
  } else {
    dc_prev = std::move(dc_star);
  }
}

}  // namespace procast::nn
