#pragma once

#include <string>

#include "json.hpp"
#include "procast/container.hpp"
#include "procast/encoding.hpp"
#include "procast/model.hpp"

namespace procast {

struct Checkpoint {
  MultitaskModel model;
  ActivityVocabulary vocab;
  TimeDivisors divisors;
  int k_max = 0;
};

namespace detail {

inline NamedArray to_array(const nn::Matrix& m) {
  NamedArray a;
  a.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  a.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.data.push_back(m(r, c));
  return a;
}

inline nn::Matrix from_array(const NamedArray& a, const std::string& name) {
  if (a.shape.size() != 2) throw DataError("checkpoint array '" + name + "' must be rank 2");
  nn::Matrix m(static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.data[i++];
  return m;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"cell_kind", c.cell_kind == nn::CellKind::TLSTM ? "tlstm" : "lstm"},
                        {"cost_sensitive", c.cost_sensitive},
                        {"hidden_units", c.hidden_units},
                        {"dropout_rate", c.dropout_rate},
                        {"learning_rate", c.learning_rate},
                        {"max_epochs", c.max_epochs},
                        {"batch_size", c.batch_size},
                        {"patience", c.patience},
                        {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  const std::string kind = j.at("cell_kind").get<std::string>();
  if (kind == "tlstm") c.cell_kind = nn::CellKind::TLSTM;
  else if (kind == "lstm") c.cell_kind = nn::CellKind::LSTM;
  else throw DataError("unknown cell kind '" + kind + "' in checkpoint");
  c.cost_sensitive = j.at("cost_sensitive").get<bool>();
  c.hidden_units = j.at("hidden_units").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.patience = j.at("patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

// Persists parameters, batch-norm moving statistics, and everything needed
// to predict on raw CSV (vocabulary, divisors, k_max). Optimizer moments are
// deliberately not stored; a resumed run starts with fresh slots.
inline void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
  Container c;
  nlohmann::json meta;
  meta["kind"] = "model-checkpoint";
  meta["config"] = config_to_json(ckpt.model.config);
  meta["num_classes"] = ckpt.model.num_classes;
  meta["input_width"] = ckpt.model.input_width;
  meta["class_weights"] = ckpt.model.class_weights.weight;
  meta["vocabulary"] = vocabulary_to_json(ckpt.vocab);
  meta["d_between"] = ckpt.divisors.d_between;
  meta["d_since_start"] = ckpt.divisors.d_since_start;
  meta["k_max"] = ckpt.k_max;
  meta["head_order"] = "bn_dropout_dense";
  c.metadata = meta.dump();

  for (nn::Parameter* p : ckpt.model.params()) c.arrays[p->name] = detail::to_array(p->value);
  c.arrays["shared.bn.moving_mean"] = detail::to_array(ckpt.model.bn_shared.moving_mean);
  c.arrays["shared.bn.moving_var"] = detail::to_array(ckpt.model.bn_shared.moving_var);
  c.arrays["act.bn.moving_mean"] = detail::to_array(ckpt.model.bn_act.moving_mean);
  c.arrays["act.bn.moving_var"] = detail::to_array(ckpt.model.bn_act.moving_var);
  c.arrays["time.bn.moving_mean"] = detail::to_array(ckpt.model.bn_time.moving_mean);
  c.arrays["time.bn.moving_var"] = detail::to_array(ckpt.model.bn_time.moving_var);
  write_container_file(path, c);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const Container c = read_container_file(path);
  nlohmann::json meta = nlohmann::json::parse(c.metadata);
  if (meta.value("kind", "") != "model-checkpoint")
    throw DataError("'" + path + "' is not a model checkpoint");

  Checkpoint ckpt;
  const ModelConfig cfg = config_from_json(meta.at("config"));
  const int num_classes = meta.at("num_classes").get<int>();
  const int input_width = meta.at("input_width").get<int>();
  ClassWeights weights;
  weights.weight = meta.at("class_weights").get<std::vector<double>>();
  ckpt.model.init(cfg, num_classes, input_width, weights);
  // init() replaces the weights of a cost-insensitive model with units;
  // restore exactly what was stored.
  ckpt.model.class_weights = std::move(weights);
  ckpt.vocab = vocabulary_from_json(meta.at("vocabulary"));
  ckpt.divisors.d_between = meta.at("d_between").get<double>();
  ckpt.divisors.d_since_start = meta.at("d_since_start").get<double>();
  ckpt.k_max = meta.at("k_max").get<int>();
  if (ckpt.vocab.size() != num_classes)
    throw DataError("checkpoint vocabulary size disagrees with class count");

  for (nn::Parameter* p : ckpt.model.params()) {
    auto it = c.arrays.find(p->name);
    if (it == c.arrays.end()) throw DataError("checkpoint missing parameter '" + p->name + "'");
    nn::Matrix stored = detail::from_array(it->second, p->name);
    if (stored.rows() != p->value.rows() || stored.cols() != p->value.cols())
      throw DataError("checkpoint parameter '" + p->name + "' has shape " +
                      std::to_string(stored.rows()) + "x" + std::to_string(stored.cols()) +
                      ", expected " + std::to_string(p->value.rows()) + "x" +
                      std::to_string(p->value.cols()));
    p->value = std::move(stored);
  }
  auto load_stat = [&](const char* name) {
    auto it = c.arrays.find(name);
    if (it == c.arrays.end()) throw DataError(std::string("checkpoint missing '") + name + "'");
    return detail::from_array(it->second, name);
  };
  ckpt.model.bn_shared.moving_mean = load_stat("shared.bn.moving_mean");
  ckpt.model.bn_shared.moving_var = load_stat("shared.bn.moving_var");
  ckpt.model.bn_act.moving_mean = load_stat("act.bn.moving_mean");
  ckpt.model.bn_act.moving_var = load_stat("act.bn.moving_var");
  ckpt.model.bn_time.moving_mean = load_stat("time.bn.moving_mean");
  ckpt.model.bn_time.moving_var = load_stat("time.bn.moving_var");
  return ckpt;
}

}  // namespace procast
