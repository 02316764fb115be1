#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "procast/model.hpp"

namespace procast {

struct EvalReport {
  std::string dataset;
  std::string variant;
  double accuracy = 0.0;
  double mae_days = 0.0;
  std::size_t prefix_count = 0;
  ModelConfig config;
};

// Ties go to the lowest class index.
inline int argmax_class(const nn::Matrix& probs, Eigen::Index col) {
  int best = 0;
  for (Eigen::Index k = 1; k < probs.rows(); ++k)
    if (probs(k, col) > probs(best, col)) best = static_cast<int>(k);
  return best;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.empty() || predicted.size() != truth.size())
    throw UsageError("accuracy needs two equal-length non-empty sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// Predictions and targets are in d_between-normalized units; the report is
// in days.
inline double mae_days(const std::vector<double>& pred, const std::vector<double>& target,
                       double d_between) {
  if (pred.empty() || pred.size() != target.size())
    throw UsageError("mae needs two equal-length non-empty sequences");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - target[i]);
  return sum / static_cast<double>(pred.size()) * d_between / 86400.0;
}

struct EvalOptions {
  int batch_size = 64;
  bool clamp_negative_time = false;  // off by default: the head is linear
};

inline EvalReport evaluate(MultitaskModel& model, const std::vector<EncodedPrefix>& test_set,
                           const TimeDivisors& divisors, const std::string& dataset_name,
                           const EvalOptions& opts = {}) {
  if (test_set.empty()) throw DataError("test set has no prefixes");
  std::mt19937_64 unused_rng(0);
  std::vector<int> pred_class, true_class;
  std::vector<double> pred_time, true_time;
  pred_class.reserve(test_set.size());
  const auto batches = batch_prefixes(test_set.size(), static_cast<std::size_t>(opts.batch_size));
  for (const auto& idx : batches) {
    ModelBatch batch = assemble_batch(test_set, idx);
    ForwardCache cache;
    model_forward(model, batch, nn::Mode::Infer, unused_rng, cache);
    for (Eigen::Index b = 0; b < cache.probs.cols(); ++b) {
      pred_class.push_back(argmax_class(cache.probs, b));
      true_class.push_back(batch.next_activity[static_cast<std::size_t>(b)]);
      double t = cache.time_pred(0, b);
      if (opts.clamp_negative_time && t < 0.0) t = 0.0;
      pred_time.push_back(t);
      true_time.push_back(batch.next_time(0, b));
    }
  }
  EvalReport report;
  report.dataset = dataset_name;
  report.variant = model.config.variant_name();
  report.accuracy = accuracy(pred_class, true_class);
  report.mae_days = mae_days(pred_time, true_time, divisors.d_between);
  report.prefix_count = test_set.size();
  report.config = model.config;
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  return nlohmann::json{{"dataset", r.dataset},
                        {"variant", r.variant},
                        {"accuracy", r.accuracy},
                        {"mae_days", r.mae_days},
                        {"n_prefixes", r.prefix_count},
                        {"config",
                         {{"cell_kind", r.config.cell_kind == nn::CellKind::TLSTM ? "tlstm" : "lstm"},
                          {"cost_sensitive", r.config.cost_sensitive},
                          {"hidden_units", r.config.hidden_units},
                          {"dropout_rate", r.config.dropout_rate},
                          {"learning_rate", r.config.learning_rate},
                          {"seed", r.config.seed}}}};
}

// One JSON object per line, machine-readable.
inline std::string format_rows(const std::vector<EvalReport>& reports) {
  std::string out;
  for (const auto& r : reports) out += report_to_json(r).dump() + "\n";
  return out;
}

inline std::string format_table(const std::vector<EvalReport>& reports) {
  std::string out = "dataset          variant           accuracy  mae_days  n_prefixes\n";
  char line[160];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-16s %-17s %8.4f  %8.4f  %10zu\n", r.dataset.c_str(),
                  r.variant.c_str(), r.accuracy, r.mae_days, r.prefix_count);
    out += line;
  }
  return out;
}

}  // namespace procast
