#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "procast/encoding.hpp"
#include "procast/errors.hpp"
#include "procast/nn/gradcheck.hpp"
#include "procast/nn/layers.hpp"
#include "procast/nn/losses.hpp"
#include "procast/nn/nadam.hpp"

namespace procast {

struct ModelConfig {
  nn::CellKind cell_kind = nn::CellKind::LSTM;
  bool cost_sensitive = false;
  int hidden_units = 100;
  double dropout_rate = 0.0;
  double learning_rate = 0.002;
  int max_epochs = 150;
  int batch_size = 64;
  int patience = 25;
  std::uint64_t seed = 42;

  void validate() const {
    if (hidden_units < 1) throw UsageError("hidden units must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw UsageError("dropout must be in [0,1)");
    if (learning_rate <= 0.0) throw UsageError("learning rate must be positive");
    if (max_epochs < 1) throw UsageError("epochs must be positive");
    if (batch_size < 1) throw UsageError("batch size must be positive");
    if (patience < 1) throw UsageError("patience must be positive");
  }

  std::string variant_name() const {
    std::string name = "Tax";
    if (cost_sensitive) name += "+CS";
    if (cell_kind == nn::CellKind::TLSTM) name += "+T-LSTM";
    return name;
  }
};

// Shared recurrent encoder feeding an activity branch and a time branch.
// Each recurrent layer is followed by batch normalization; each branch ends
// in dropout and a dense head (softmax over classes / linear scalar).
struct MultitaskModel {
  ModelConfig config;
  int num_classes = 0;
  int input_width = 0;
  ClassWeights class_weights;

  nn::RecurrentLayer shared;
  nn::BatchNorm bn_shared;
  nn::RecurrentLayer act_rnn;
  nn::BatchNorm bn_act;
  nn::Dropout drop_act;
  nn::Dense dense_act;
  nn::RecurrentLayer time_rnn;
  nn::BatchNorm bn_time;
  nn::Dropout drop_time;
  nn::Dense dense_time;

  void init(const ModelConfig& cfg, int classes, int width, const ClassWeights& weights) {
    cfg.validate();
    if (classes < 1 || width < 1) throw UsageError("model needs positive class count and width");
    if (static_cast<int>(weights.weight.size()) != classes)
      throw UsageError("class weight count does not match class count");
    config = cfg;
    num_classes = classes;
    input_width = width;
    class_weights = cfg.cost_sensitive ? weights : nn::unit_weights(classes);

    std::mt19937_64 rng(cfg.seed);
    const Eigen::Index H = cfg.hidden_units;
    shared.kind = cfg.cell_kind;
    act_rnn.kind = cfg.cell_kind;
    time_rnn.kind = cfg.cell_kind;
    shared.init(H, width, rng, "shared.rnn");
    bn_shared.init(H, "shared.bn");
    act_rnn.init(H, H, rng, "act.rnn");
    bn_act.init(H, "act.bn");
    drop_act.rate = cfg.dropout_rate;
    dense_act.init(classes, H, rng, "act.dense");
    time_rnn.init(H, H, rng, "time.rnn");
    bn_time.init(H, "time.bn");
    drop_time.rate = cfg.dropout_rate;
    dense_time.init(1, H, rng, "time.dense");
  }

  std::vector<nn::Parameter*> params() {
    std::vector<nn::Parameter*> ps;
    for (auto* group :
         {&shared, &act_rnn, &time_rnn}) {
      auto gp = group->params();
      ps.insert(ps.end(), gp.begin(), gp.end());
    }
    for (auto* bn : {&bn_shared, &bn_act, &bn_time}) {
      auto gp = bn->params();
      ps.insert(ps.end(), gp.begin(), gp.end());
    }
    for (auto* d : {&dense_act, &dense_time}) {
      auto gp = d->params();
      ps.insert(ps.end(), gp.begin(), gp.end());
    }
    return ps;
  }
};

// One assembled mini-batch in step-major layout plus its two label sets.
struct ModelBatch {
  nn::SequenceBatch seq;
  std::vector<int> next_activity;
  nn::Matrix next_time;  // (1, B), normalized units
};

inline ModelBatch assemble_batch(const std::vector<EncodedPrefix>& prefixes,
                                 const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw UsageError("cannot assemble an empty batch");
  const Eigen::Index B = static_cast<Eigen::Index>(indices.size());
  const int k_max = static_cast<int>(prefixes[indices[0]].features.rows());
  const int n = static_cast<int>(prefixes[indices[0]].features.cols());
  ModelBatch batch;
  batch.seq.x.assign(k_max, nn::Matrix::Zero(n, B));
  batch.seq.delta.assign(k_max, nn::RowVector::Zero(B));
  batch.seq.mask.assign(k_max, nn::RowVector::Zero(B));
  batch.next_activity.resize(indices.size());
  batch.next_time.resize(1, B);
  int max_len = 0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const EncodedPrefix& ep = prefixes[indices[static_cast<std::size_t>(b)]];
    if (ep.features.rows() != k_max || ep.features.cols() != n)
      throw UsageError("batch mixes prefixes of different encoded shapes");
    max_len = std::max(max_len, ep.length);
    for (int t = 0; t < k_max; ++t) batch.seq.x[t].col(b) = ep.features.row(t).transpose();
    for (int j = 0; j < ep.length; ++j) {
      const int t = k_max - ep.length + j;
      batch.seq.mask[t](b) = 1.0;
      batch.seq.delta[t](b) = ep.deltas[static_cast<std::size_t>(j)];
    }
    batch.next_activity[static_cast<std::size_t>(b)] = ep.next_activity;
    batch.next_time(0, b) = ep.next_time_delta;
  }
  batch.seq.first_real_step = k_max - max_len;
  return batch;
}

struct ForwardCache {
  nn::RecurrentCache shared_rnn;
  std::vector<std::pair<int, Eigen::Index>> real_positions;  // (t, column)
  nn::BatchNormCache bn_shared;
  nn::SequenceBatch branch_in;
  nn::RecurrentCache act_rnn, time_rnn;
  nn::BatchNormCache bn_act, bn_time;
  nn::DropoutCache drop_act, drop_time;
  nn::DenseCache dense_act, dense_time;
  nn::Matrix probs;      // (K, B)
  nn::Matrix time_pred;  // (1, B)
};

// Runs the full network. In train mode batch statistics are used and dropout
// draws from rng; moving statistics are NOT advanced here (see
// commit_batchnorm_stats), keeping the forward pure for gradient checking.
inline void model_forward(MultitaskModel& m, const ModelBatch& batch, nn::Mode mode,
                          std::mt19937_64& rng, ForwardCache& cache) {
  m.shared.forward(batch.seq, cache.shared_rnn);
  const int k = batch.seq.steps();
  const Eigen::Index B = batch.seq.cols();
  const Eigen::Index H = m.shared.hidden();

  cache.real_positions.clear();
  for (int t = cache.shared_rnn.t0; t < k; ++t)
    for (Eigen::Index b = 0; b < B; ++b)
      if (batch.seq.mask[t](b) == 1.0) cache.real_positions.emplace_back(t, b);
  nn::Matrix gathered(H, static_cast<Eigen::Index>(cache.real_positions.size()));
  for (std::size_t i = 0; i < cache.real_positions.size(); ++i) {
    const auto [t, b] = cache.real_positions[i];
    gathered.col(static_cast<Eigen::Index>(i)) = cache.shared_rnn.h[t].col(b);
  }
  nn::Matrix normed = m.bn_shared.forward(gathered, mode, cache.bn_shared);

  cache.branch_in.x.assign(k, nn::Matrix::Zero(H, B));
  cache.branch_in.delta = batch.seq.delta;
  cache.branch_in.mask = batch.seq.mask;
  cache.branch_in.first_real_step = batch.seq.first_real_step;
  for (std::size_t i = 0; i < cache.real_positions.size(); ++i) {
    const auto [t, b] = cache.real_positions[i];
    cache.branch_in.x[t].col(b) = normed.col(static_cast<Eigen::Index>(i));
  }

  m.act_rnn.forward(cache.branch_in, cache.act_rnn);
  m.time_rnn.forward(cache.branch_in, cache.time_rnn);

  nn::Matrix act_h = m.bn_act.forward(cache.act_rnn.h.back(), mode, cache.bn_act);
  act_h = m.drop_act.forward(act_h, mode, rng, cache.drop_act);
  cache.probs = nn::softmax(m.dense_act.forward(act_h, cache.dense_act));

  nn::Matrix time_h = m.bn_time.forward(cache.time_rnn.h.back(), mode, cache.bn_time);
  time_h = m.drop_time.forward(time_h, mode, rng, cache.drop_time);
  cache.time_pred = m.dense_time.forward(time_h, cache.dense_time);
}

struct LossParts {
  double ce = 0.0;
  double mae = 0.0;
  double total() const { return ce + mae; }
};

inline LossParts model_loss(const MultitaskModel& m, const ForwardCache& cache,
                            const ModelBatch& batch, nn::Matrix* dlogits = nullptr,
                            nn::Matrix* dtime = nullptr) {
  LossParts parts;
  parts.ce = nn::weighted_cross_entropy(cache.probs, batch.next_activity, m.class_weights, dlogits);
  parts.mae = nn::mae_loss(cache.time_pred, batch.next_time, dtime);
  return parts;
}

// Backpropagates the summed loss; parameter gradients accumulate in place.
inline void model_backward(MultitaskModel& m, ForwardCache& cache, const nn::Matrix& dlogits,
                           const nn::Matrix& dtime) {
  const int k = cache.branch_in.steps();
  const Eigen::Index H = m.shared.hidden();
  const Eigen::Index B = cache.probs.cols();

  nn::Matrix d_act = m.dense_act.backward(cache.dense_act, dlogits);
  d_act = m.drop_act.backward(cache.drop_act, d_act);
  d_act = m.bn_act.backward(cache.bn_act, d_act);
  std::vector<nn::Matrix> dh_act(k);
  dh_act[k - 1] = d_act;
  std::vector<nn::Matrix> dx_act;
  m.act_rnn.backward(cache.act_rnn, dh_act, &dx_act);

  nn::Matrix d_time = m.dense_time.backward(cache.dense_time, dtime);
  d_time = m.drop_time.backward(cache.drop_time, d_time);
  d_time = m.bn_time.backward(cache.bn_time, d_time);
  std::vector<nn::Matrix> dh_time(k);
  dh_time[k - 1] = d_time;
  std::vector<nn::Matrix> dx_time;
  m.time_rnn.backward(cache.time_rnn, dh_time, &dx_time);

  nn::Matrix d_normed(H, static_cast<Eigen::Index>(cache.real_positions.size()));
  for (std::size_t i = 0; i < cache.real_positions.size(); ++i) {
    const auto [t, b] = cache.real_positions[i];
    d_normed.col(static_cast<Eigen::Index>(i)) = dx_act[t].col(b) + dx_time[t].col(b);
  }
  nn::Matrix d_gathered = m.bn_shared.backward(cache.bn_shared, d_normed);

  std::vector<nn::Matrix> dh_shared(k, nn::Matrix::Zero(H, B));
  for (std::size_t i = 0; i < cache.real_positions.size(); ++i) {
    const auto [t, b] = cache.real_positions[i];
    dh_shared[t].col(b) = d_gathered.col(static_cast<Eigen::Index>(i));
  }
  m.shared.backward(cache.shared_rnn, dh_shared, nullptr);
}

inline void commit_batchnorm_stats(MultitaskModel& m, const ForwardCache& cache) {
  m.bn_shared.update_moving_stats(cache.bn_shared);
  m.bn_act.update_moving_stats(cache.bn_act);
  m.bn_time.update_moving_stats(cache.bn_time);
}

// Improvement means a strictly lower validation loss; after `patience`
// consecutive non-improving epochs, stop.
struct EarlyStopping {
  int patience = 25;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epochs_since_improvement = 0;

  bool observe(int epoch, double val_loss) {
    if (val_loss < best) {
      best = val_loss;
      best_epoch = epoch;
      epochs_since_improvement = 0;
      return true;
    }
    ++epochs_since_improvement;
    return false;
  }

  bool should_stop() const { return epochs_since_improvement >= patience; }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_ce;
  std::vector<double> val_mae;
  std::vector<double> val_total;
  int best_epoch = 0;  // 1-based
  bool stopped_early = false;
};

struct ModelSnapshot {
  std::vector<nn::Matrix> values;
  nn::Matrix mm_shared, mv_shared, mm_act, mv_act, mm_time, mv_time;
};

inline ModelSnapshot snapshot_model(MultitaskModel& m) {
  ModelSnapshot s;
  for (nn::Parameter* p : m.params()) s.values.push_back(p->value);
  s.mm_shared = m.bn_shared.moving_mean;
  s.mv_shared = m.bn_shared.moving_var;
  s.mm_act = m.bn_act.moving_mean;
  s.mv_act = m.bn_act.moving_var;
  s.mm_time = m.bn_time.moving_mean;
  s.mv_time = m.bn_time.moving_var;
  return s;
}

inline void restore_model(MultitaskModel& m, const ModelSnapshot& s) {
  auto ps = m.params();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s.values[i];
  m.bn_shared.moving_mean = s.mm_shared;
  m.bn_shared.moving_var = s.mv_shared;
  m.bn_act.moving_mean = s.mm_act;
  m.bn_act.moving_var = s.mv_act;
  m.bn_time.moving_mean = s.mm_time;
  m.bn_time.moving_var = s.mv_time;
}

// Mean per-example loss over a dataset with frozen statistics (inference
// mode, dropout off).
inline LossParts evaluate_loss(MultitaskModel& m, const std::vector<EncodedPrefix>& prefixes,
                               int batch_size) {
  if (prefixes.empty()) throw UsageError("cannot evaluate an empty dataset");
  std::mt19937_64 unused_rng(0);
  double ce = 0.0, mae = 0.0;
  const auto batches = batch_prefixes(prefixes.size(), static_cast<std::size_t>(batch_size));
  for (const auto& idx : batches) {
    ModelBatch batch = assemble_batch(prefixes, idx);
    ForwardCache cache;
    model_forward(m, batch, nn::Mode::Infer, unused_rng, cache);
    LossParts parts = model_loss(m, cache, batch);
    ce += parts.ce * static_cast<double>(idx.size());
    mae += parts.mae * static_cast<double>(idx.size());
  }
  LossParts out;
  out.ce = ce / static_cast<double>(prefixes.size());
  out.mae = mae / static_cast<double>(prefixes.size());
  return out;
}

using EpochCallback =
    std::function<void(int epoch, double train_loss, const LossParts& val, double seconds)>;

// Full training run: shuffled mini-batches, Nadam updates, per-epoch
// validation in inference mode, early stopping with best-snapshot restore.
inline TrainHistory train_model(MultitaskModel& m, const std::vector<EncodedPrefix>& train_set,
                                const std::vector<EncodedPrefix>& val_set,
                                const EpochCallback& on_epoch = {}) {
  if (train_set.empty()) throw DataError("training set has no prefixes");
  if (val_set.empty()) throw DataError("validation set has no prefixes");
  if (train_set.size() < 2)
    throw DataError("training needs at least 2 prefixes for batch statistics");

  const ModelConfig& cfg = m.config;
  nn::Nadam opt;
  opt.lr = cfg.learning_rate;
  auto params = m.params();
  std::mt19937_64 train_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);

  TrainHistory history;
  EarlyStopping stopper{cfg.patience};
  ModelSnapshot best = snapshot_model(m);
  long step = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    auto batches =
        batch_prefixes(train_set.size(), static_cast<std::size_t>(cfg.batch_size), train_rng());
    // Batch statistics need at least 2 examples; fold a trailing singleton
    // into the previous batch.
    if (batches.size() > 1 && batches.back().size() == 1) {
      batches[batches.size() - 2].push_back(batches.back()[0]);
      batches.pop_back();
    }
    double epoch_loss = 0.0;
    for (const auto& idx : batches) {
      ModelBatch batch = assemble_batch(train_set, idx);
      nn::zero_grads(params);
      ForwardCache cache;
      model_forward(m, batch, nn::Mode::Train, train_rng, cache);
      nn::Matrix dlogits, dtime;
      LossParts parts = model_loss(m, cache, batch, &dlogits, &dtime);
      model_backward(m, cache, dlogits, dtime);
      opt.step(params, ++step);
      commit_batchnorm_stats(m, cache);
      epoch_loss += parts.total() * static_cast<double>(idx.size());
    }
    epoch_loss /= static_cast<double>(train_set.size());

    const LossParts val = evaluate_loss(m, val_set, cfg.batch_size);
    const double val_total = val.total();
    history.train_loss.push_back(epoch_loss);
    history.val_ce.push_back(val.ce);
    history.val_mae.push_back(val.mae);
    history.val_total.push_back(val_total);

    if (!std::isfinite(epoch_loss) || !std::isfinite(val_total) || epoch_loss > 1e6 ||
        val_total > 1e6)
      throw NumericError("training diverged at epoch " + std::to_string(epoch));

    if (stopper.observe(epoch, val_total)) best = snapshot_model(m);
    if (on_epoch) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      on_epoch(epoch, epoch_loss, val, secs);
    }
    if (stopper.should_stop()) {
      history.stopped_early = true;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch;
  restore_model(m, best);
  return history;
}

// --- grid search -----------------------------------------------------------

struct GridPoint {
  int hidden_units;
  double dropout_rate;
  double learning_rate;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

inline std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> grid;
  for (int units : {64, 100})
    for (double dropout : {0.0, 0.2})
      for (double lr : {0.0001, 0.0002, 0.001, 0.002, 0.01})
        grid.push_back(GridPoint{units, dropout, lr});
  return grid;
}

struct GridResult {
  GridPoint point;
  double val_total = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  bool diverged = false;
};

// Lowest validation total wins; ties prefer fewer units, then lower learning
// rate. Diverged entries never win.
inline GridPoint select_best(const std::vector<GridResult>& results) {
  const GridResult* best = nullptr;
  for (const auto& r : results) {
    if (r.diverged) continue;
    if (!best || r.val_total < best->val_total ||
        (r.val_total == best->val_total &&
         (r.point.hidden_units < best->point.hidden_units ||
          (r.point.hidden_units == best->point.hidden_units &&
           r.point.learning_rate < best->point.learning_rate))))
      best = &r;
  }
  if (!best) throw NumericError("every grid configuration diverged");
  return best->point;
}

using GridCallback = std::function<void(const GridResult&, MultitaskModel&)>;

// Trains every grid point with the same base config and seed. Configurations
// are independent; `threads` > 1 trains them concurrently. The callback runs
// under a lock, in completion order.
inline std::vector<GridResult> run_grid(const std::vector<GridPoint>& grid,
                                        const ModelConfig& base, int num_classes,
                                        int feature_width, const ClassWeights& weights,
                                        const std::vector<EncodedPrefix>& train_set,
                                        const std::vector<EncodedPrefix>& val_set, int threads,
                                        const GridCallback& on_done = {}) {
  if (grid.empty()) throw UsageError("grid is empty");
  std::vector<GridResult> results(grid.size());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      ModelConfig cfg = base;
      cfg.hidden_units = grid[i].hidden_units;
      cfg.dropout_rate = grid[i].dropout_rate;
      cfg.learning_rate = grid[i].learning_rate;
      GridResult r;
      r.point = grid[i];
      MultitaskModel model;
      model.init(cfg, num_classes, feature_width, weights);
      try {
        TrainHistory h = train_model(model, train_set, val_set);
        r.best_epoch = h.best_epoch;
        r.val_total = *std::min_element(h.val_total.begin(), h.val_total.end());
      } catch (const NumericError&) {
        r.diverged = true;
      }
      std::lock_guard<std::mutex> lock(mu);
      results[i] = r;
      if (on_done) on_done(r, model);
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(grid.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

}  // namespace procast
