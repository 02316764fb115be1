#pragma once

#include <random>
#include <string>
#include <vector>

#include "procast/model.hpp"
#include "procast/nn/gradcheck.hpp"
#include "procast/rng.hpp"

namespace procast {

// Finite-difference verification of every differentiable operation and of
// the full multitask model on tiny shapes. Shared by the gradcheck command
// and the acceptance suite.

struct SelfCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 1e-4;
  bool pass() const { return max_rel_error <= tolerance; }
};

namespace detail {

inline nn::Matrix random_signed(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng,
                                double scale = 1.0) {
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = (2.0 * uniform01(rng) - 1.0) * scale;
  return m;
}

inline double check_dense_softmax_ce(std::mt19937_64& rng) {
  nn::Dense dense;
  dense.init(3, 4, rng, "d");
  nn::Parameter px("x", random_signed(4, 2, rng));
  ClassWeights w;
  w.weight = {1.0 + uniform01(rng), 1.0 + uniform01(rng), uniform01(rng) + 0.1};
  const std::vector<int> targets{static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)};
  std::vector<nn::Parameter*> params = {&dense.W, &dense.b, &px};
  auto f = [&]() {
    nn::zero_grads(params);
    nn::DenseCache cache;
    nn::Matrix probs = nn::softmax(dense.forward(px.value, cache));
    nn::Matrix dlogits;
    const double loss = nn::weighted_cross_entropy(probs, targets, w, &dlogits);
    px.grad = dense.backward(cache, dlogits);
    return loss;
  };
  return nn::grad_check(f, params).max_rel_error;
}

inline double check_dense_mae(std::mt19937_64& rng) {
  nn::Dense dense;
  dense.init(1, 4, rng, "t");
  nn::Parameter px("x", random_signed(4, 3, rng));
  nn::Matrix target = random_signed(1, 3, rng, 5.0).array() + 10.0;  // residuals far from 0
  std::vector<nn::Parameter*> params = {&dense.W, &dense.b, &px};
  auto f = [&]() {
    nn::zero_grads(params);
    nn::DenseCache cache;
    nn::Matrix pred = dense.forward(px.value, cache);
    nn::Matrix dpred;
    const double loss = nn::mae_loss(pred, target, &dpred);
    px.grad = dense.backward(cache, dpred);
    return loss;
  };
  return nn::grad_check(f, params).max_rel_error;
}

inline double check_batchnorm(std::mt19937_64& rng) {
  nn::BatchNorm bn;
  bn.init(3, "bn");
  bn.gamma.value = random_signed(3, 1, rng).array() + 1.5;
  bn.beta.value = random_signed(3, 1, rng);
  nn::Parameter px("x", random_signed(3, 5, rng, 2.0));
  const nn::Matrix r = random_signed(3, 5, rng);
  std::vector<nn::Parameter*> params = {&bn.gamma, &bn.beta, &px};
  auto f = [&]() {
    nn::zero_grads(params);
    nn::BatchNormCache cache;
    nn::Matrix y = bn.forward(px.value, nn::Mode::Train, cache);
    px.grad = bn.backward(cache, r);
    return y.cwiseProduct(r).sum();
  };
  return nn::grad_check(f, params).max_rel_error;
}

inline double check_dropout(std::mt19937_64& rng) {
  nn::Dropout drop{0.4};
  nn::Parameter px("x", random_signed(3, 4, rng));
  nn::DropoutCache frozen;
  drop.forward(px.value, nn::Mode::Train, rng, frozen);  // freeze one mask
  const nn::Matrix r = random_signed(3, 4, rng);
  auto f = [&]() {
    px.zero_grad();
    nn::Matrix y = px.value.cwiseProduct(frozen.mask);
    px.grad = drop.backward(frozen, r);
    return y.cwiseProduct(r).sum();
  };
  return nn::grad_check(f, {&px}).max_rel_error;
}

template <typename Cell>
double check_cell(std::mt19937_64& rng) {
  Cell cell;
  cell.init(4, 3, rng, "cell");
  nn::Parameter px("x", random_signed(3, 2, rng));
  nn::Parameter ph("h0", random_signed(4, 2, rng));
  nn::Parameter pc("c0", random_signed(4, 2, rng));
  nn::RowVector deltas(2);
  deltas << 500.0 * uniform01(rng), 2e5 * uniform01(rng);
  const nn::Matrix rh = random_signed(4, 2, rng);
  const nn::Matrix rc = random_signed(4, 2, rng);
  std::vector<nn::Parameter*> params = cell.params();
  params.push_back(&px);
  params.push_back(&ph);
  params.push_back(&pc);
  auto f = [&]() {
    nn::zero_grads(params);
    nn::LSTMStepCache cache;
    nn::Matrix h, c, dx, dh_prev, dc_prev;
    if constexpr (std::is_same_v<Cell, nn::TLSTMCellParams>) {
      nn::tlstm_cell_forward(cell, px.value, ph.value, pc.value, deltas, cache, h, c);
      nn::lstm_cell_backward(cell.base, &cell.W_d, &cell.b_d, cache, rh, rc, dx, dh_prev, dc_prev);
    } else {
      nn::lstm_cell_forward(cell, px.value, ph.value, pc.value, cache, h, c);
      nn::lstm_cell_backward(cell, nullptr, nullptr, cache, rh, rc, dx, dh_prev, dc_prev);
    }
    px.grad = dx;
    ph.grad = dh_prev;
    pc.grad = dc_prev;
    return h.cwiseProduct(rh).sum() + c.cwiseProduct(rc).sum();
  };
  return nn::grad_check(f, params).max_rel_error;
}

inline double check_recurrent(std::mt19937_64& rng, nn::CellKind kind) {
  nn::RecurrentLayer layer;
  layer.kind = kind;
  layer.init(4, 3, rng, "rec");
  const int k = 3, B = 2;
  nn::SequenceBatch batch;
  std::vector<nn::Parameter> xs;
  for (int t = 0; t < k; ++t) {
    xs.emplace_back("x" + std::to_string(t), random_signed(3, B, rng));
    batch.delta.push_back((random_signed(1, B, rng).array().abs() * 1e4).matrix());
    batch.mask.push_back(nn::RowVector::Ones(B));
  }
  batch.mask[0](1) = 0.0;  // column 1 is one step shorter
  batch.delta[0](1) = 0.0;
  batch.first_real_step = 0;
  std::vector<nn::Matrix> r(k);
  for (int t = 0; t < k; ++t) r[t] = random_signed(4, B, rng);

  std::vector<nn::Parameter*> params = layer.params();
  for (auto& p : xs) params.push_back(&p);
  auto f = [&]() {
    nn::zero_grads(params);
    batch.x.clear();
    for (auto& p : xs) batch.x.push_back(p.value);
    nn::RecurrentCache cache;
    layer.forward(batch, cache);
    double loss = 0.0;
    std::vector<nn::Matrix> dh(k);
    for (int t = 0; t < k; ++t) {
      loss += cache.h[t].cwiseProduct(r[t]).sum();
      dh[t] = r[t];
    }
    std::vector<nn::Matrix> dx;
    layer.backward(cache, dh, &dx);
    for (int t = 0; t < k; ++t) xs[static_cast<std::size_t>(t)].grad = dx[t];
    return loss;
  };
  return nn::grad_check(f, params).max_rel_error;
}

// Random prefixes with the exact layout the encoder produces: left padding,
// one-hot activity rows, deltas starting at 0.
inline std::vector<EncodedPrefix> random_prefixes(std::mt19937_64& rng, int count, int k_max,
                                                  int num_classes, int width) {
  std::vector<EncodedPrefix> out;
  for (int i = 0; i < count; ++i) {
    EncodedPrefix ep;
    const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(k_max));
    ep.features = Eigen::MatrixXd::Zero(k_max, width);
    ep.length = k;
    ep.deltas.resize(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) {
      const int row = k_max - k + t;
      ep.features(row, static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(num_classes))) =
          1.0;
      for (int j = num_classes; j < width; ++j) ep.features(row, j) = uniform01(rng);
      ep.deltas[static_cast<std::size_t>(t)] = t == 0 ? 0.0 : 3600.0 * uniform01(rng);
    }
    ep.next_activity = static_cast<int>(rng() % static_cast<std::uint64_t>(num_classes));
    ep.next_time_delta = 2.0 * uniform01(rng);
    out.push_back(std::move(ep));
  }
  return out;
}

inline double check_full_model(std::mt19937_64& rng, nn::CellKind kind) {
  const int K = 3, k_max = 3, width = K + 2;
  ModelConfig cfg;
  cfg.cell_kind = kind;
  cfg.cost_sensitive = true;
  cfg.hidden_units = 4;
  cfg.dropout_rate = 0.0;
  cfg.seed = rng();
  ClassWeights w;
  w.weight = {1.0 + uniform01(rng), 0.5 + uniform01(rng), 1.5 + uniform01(rng)};
  MultitaskModel m;
  m.init(cfg, K, width, w);
  auto prefixes = random_prefixes(rng, 2, k_max, K, width);
  ModelBatch batch = assemble_batch(prefixes, {0, 1});
  std::mt19937_64 drop_rng(0);
  auto params = m.params();
  auto f = [&]() {
    nn::zero_grads(params);
    ForwardCache cache;
    model_forward(m, batch, nn::Mode::Train, drop_rng, cache);
    nn::Matrix dlogits, dtime;
    LossParts parts = model_loss(m, cache, batch, &dlogits, &dtime);
    model_backward(m, cache, dlogits, dtime);
    return parts.total();
  };
  return nn::grad_check(f, params).max_rel_error;
}

}  // namespace detail

// Each check runs `trials` times with distinct sub-seeds; the worst relative
// error is reported. The dropout check compares against an exact closed form
// of a frozen-mask linear map, where finite differences cancel more sharply.
inline std::vector<SelfCheckResult> run_selfchecks(std::uint64_t seed, int trials) {
  if (trials < 1) throw UsageError("trials must be at least 1");
  struct Op {
    const char* name;
    double (*run)(std::mt19937_64&);
    double tolerance;
  };
  const Op ops[] = {
      {"dense+softmax+cross-entropy",
       [](std::mt19937_64& r) { return detail::check_dense_softmax_ce(r); }, 1e-4},
      {"dense+mae", [](std::mt19937_64& r) { return detail::check_dense_mae(r); }, 1e-4},
      {"batchnorm", [](std::mt19937_64& r) { return detail::check_batchnorm(r); }, 1e-4},
      {"dropout", [](std::mt19937_64& r) { return detail::check_dropout(r); }, 1e-4},
      {"lstm-cell",
       [](std::mt19937_64& r) { return detail::check_cell<nn::LSTMCellParams>(r); }, 1e-4},
      {"tlstm-cell",
       [](std::mt19937_64& r) { return detail::check_cell<nn::TLSTMCellParams>(r); }, 1e-4},
      {"recurrent-lstm",
       [](std::mt19937_64& r) { return detail::check_recurrent(r, nn::CellKind::LSTM); }, 1e-4},
      {"recurrent-tlstm",
       [](std::mt19937_64& r) { return detail::check_recurrent(r, nn::CellKind::TLSTM); }, 1e-4},
      {"model-lstm",
       [](std::mt19937_64& r) { return detail::check_full_model(r, nn::CellKind::LSTM); }, 1e-4},
      {"model-tlstm",
       [](std::mt19937_64& r) { return detail::check_full_model(r, nn::CellKind::TLSTM); }, 1e-4},
  };
  std::vector<SelfCheckResult> results;
  for (const Op& op : ops) {
    SelfCheckResult res;
    res.name = op.name;
    res.tolerance = op.tolerance;
    for (int t = 0; t < trials; ++t) {
      std::mt19937_64 rng(seed + static_cast<std::uint64_t>(t) * 1000003ull);
      res.max_rel_error = std::max(res.max_rel_error, op.run(rng));
    }
    results.push_back(res);
  }
  return results;
}

}  // namespace procast
