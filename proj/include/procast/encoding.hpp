#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "procast/container.hpp"
#include "procast/errors.hpp"
#include "procast/eventlog.hpp"
#include "procast/rng.hpp"

namespace procast {

struct ActivityVocabulary {
  std::unordered_map<std::string, int> label_to_index;
  std::vector<std::string> index_to_label;

  int size() const { return static_cast<int>(index_to_label.size()); }

  int index_of(const std::string& label) const {
    auto it = label_to_index.find(label);
    if (it == label_to_index.end())
      throw DataError("activity '" + label + "' not present in training vocabulary");
    return it->second;
  }

  friend bool operator==(const ActivityVocabulary& a, const ActivityVocabulary& b) {
    return a.index_to_label == b.index_to_label;
  }
};

struct TimeDivisors {
  double d_between = 1.0;      // mean seconds between consecutive events
  double d_since_start = 1.0;  // mean seconds since case start

  friend bool operator==(const TimeDivisors&, const TimeDivisors&) = default;
};

// One training/evaluation example: the first `length` rows of `features`
// counted from the bottom are real events, everything above is zero padding.
struct EncodedPrefix {
  Eigen::MatrixXd features;    // (k_max, n), left-padded with zero rows
  int length = 0;              // k, number of real rows
  std::vector<double> deltas;  // k elapsed seconds, deltas[0] == 0
  int next_activity = 0;       // class index
  double next_time_delta = 0;  // seconds to next event / d_between
};

struct ClassWeights {
  std::vector<double> weight;
};

inline ActivityVocabulary build_vocabulary(const EventLog& train) {
  if (train.traces.empty()) throw DataError("cannot build vocabulary from an empty log");
  ActivityVocabulary v;
  for (const auto& t : train.traces)
    for (const auto& e : t.events)
      if (v.label_to_index.emplace(e.activity, v.size()).second)
        v.index_to_label.push_back(e.activity);
  return v;
}

inline TimeDivisors compute_divisors(const EventLog& train) {
  if (train.traces.empty()) throw DataError("cannot compute divisors from an empty log");
  double gap_sum = 0, start_sum = 0;
  std::size_t gaps = 0, events = 0;
  for (const auto& t : train.traces) {
    for (std::size_t i = 0; i < t.events.size(); ++i) {
      if (i > 0) {
        gap_sum += static_cast<double>(t.events[i].timestamp - t.events[i - 1].timestamp);
        ++gaps;
      }
      start_sum += static_cast<double>(t.events[i].timestamp - t.events.front().timestamp);
      ++events;
    }
  }
  TimeDivisors d;
  d.d_between = gaps > 0 ? gap_sum / static_cast<double>(gaps) : 0.0;
  d.d_since_start = events > 0 ? start_sum / static_cast<double>(events) : 0.0;
  if (d.d_between == 0.0) d.d_between = 1.0;
  if (d.d_since_start == 0.0) d.d_since_start = 1.0;
  return d;
}

struct RawPrefix {
  const Trace* trace;          // owning trace
  int length;                  // k, prefix = first k events
  std::string next_activity;   // e_{k+1}.activity
  std::int64_t next_timestamp; // e_{k+1}.timestamp
};

// All proper prefixes of a trace: k = 1 .. |trace|-1. A 1-event trace yields
// nothing.
inline std::vector<RawPrefix> generate_prefixes(const Trace& trace) {
  std::vector<RawPrefix> out;
  for (std::size_t k = 1; k < trace.events.size(); ++k)
    out.push_back(RawPrefix{&trace, static_cast<int>(k), trace.events[k].activity,
                            trace.events[k].timestamp});
  return out;
}

inline constexpr int kExtraFeatures = 5;

inline int feature_width(const ActivityVocabulary& vocab) {
  return vocab.size() + kExtraFeatures;
}

// Encodes events[first..last) of a trace, where `first` is the window start
// after truncation to the most recent k_max events. Feature rows are
// [one-hot activity | 1-based position in case | gap/d_between |
// since-window-start/d_since_start | seconds-since-midnight/86400 |
// day-of-week/7]. Gaps and deltas are window-local, so deltas[0] == 0.
inline EncodedPrefix encode_prefix_window(const std::vector<Event>& events, std::size_t first,
                                          std::size_t last, const ActivityVocabulary& vocab,
                                          const TimeDivisors& divisors, int k_max) {
  const int k = static_cast<int>(last - first);
  if (k <= 0) throw UsageError("prefix window is empty");
  if (k > k_max) throw UsageError("prefix length exceeds k_max");
  const int n = feature_width(vocab);
  EncodedPrefix ep;
  ep.features = Eigen::MatrixXd::Zero(k_max, n);
  ep.length = k;
  ep.deltas.resize(k);
  const std::int64_t window_start_ts = events[first].timestamp;
  for (int t = 0; t < k; ++t) {
    const Event& e = events[first + t];
    const int row = k_max - k + t;
    ep.features(row, vocab.index_of(e.activity)) = 1.0;
    const double gap =
        t == 0 ? 0.0 : static_cast<double>(e.timestamp - events[first + t - 1].timestamp);
    ep.deltas[t] = gap;
    ep.features(row, vocab.size() + 0) = static_cast<double>(first + t + 1);
    ep.features(row, vocab.size() + 1) = gap / divisors.d_between;
    ep.features(row, vocab.size() + 2) =
        static_cast<double>(e.timestamp - window_start_ts) / divisors.d_since_start;
    ep.features(row, vocab.size() + 3) =
        static_cast<double>(seconds_since_midnight(e.timestamp)) / 86400.0;
    ep.features(row, vocab.size() + 4) = static_cast<double>(day_of_week_monday0(e.timestamp)) / 7.0;
  }
  return ep;
}

inline EncodedPrefix encode_prefix(const std::vector<Event>& prefix_events,
                                   const ActivityVocabulary& vocab, const TimeDivisors& divisors,
                                   int k_max) {
  return encode_prefix_window(prefix_events, 0, prefix_events.size(), vocab, divisors, k_max);
}

// Longest training trace minus one: no prefix is ever a whole trace.
inline int compute_k_max(const EventLog& train) {
  std::size_t longest = 0;
  for (const auto& t : train.traces) longest = std::max(longest, t.events.size());
  if (longest < 2) throw DataError("training log has no trace with at least 2 events");
  return static_cast<int>(longest - 1);
}

// Full pipeline for one log part: every proper prefix of every trace,
// truncated to the most recent k_max events, encoded and labeled.
inline std::vector<EncodedPrefix> encode_log(const EventLog& log, const ActivityVocabulary& vocab,
                                             const TimeDivisors& divisors, int k_max) {
  std::vector<EncodedPrefix> out;
  for (const auto& trace : log.traces) {
    for (const RawPrefix& rp : generate_prefixes(trace)) {
      const std::size_t last = static_cast<std::size_t>(rp.length);
      const std::size_t first = last > static_cast<std::size_t>(k_max)
                                    ? last - static_cast<std::size_t>(k_max)
                                    : 0;
      EncodedPrefix ep = encode_prefix_window(trace.events, first, last, vocab, divisors, k_max);
      ep.next_activity = vocab.index_of(rp.next_activity);
      ep.next_time_delta =
          static_cast<double>(rp.next_timestamp - trace.events[last - 1].timestamp) /
          divisors.d_between;
      out.push_back(std::move(ep));
    }
  }
  return out;
}

// w_c = N / (K * n_c); absent classes get weight 0.
inline ClassWeights compute_class_weights(const std::vector<int>& labels, int num_classes) {
  if (labels.empty()) throw DataError("cannot compute class weights from an empty label sequence");
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw UsageError("class index out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  ClassWeights w;
  w.weight.resize(static_cast<std::size_t>(num_classes));
  const double n = static_cast<double>(labels.size());
  const double k = static_cast<double>(num_classes);
  for (int c = 0; c < num_classes; ++c)
    w.weight[static_cast<std::size_t>(c)] =
        counts[static_cast<std::size_t>(c)] == 0
            ? 0.0
            : n / (k * static_cast<double>(counts[static_cast<std::size_t>(c)]));
  return w;
}

// Partitions 0..count-1 into batches of at most batch_size, optionally
// shuffled by seed first. The final short batch is kept.
inline std::vector<std::vector<std::size_t>> batch_prefixes(std::size_t count,
                                                            std::size_t batch_size,
                                                            std::optional<std::uint64_t> seed = {}) {
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  if (seed) {
    std::mt19937_64 rng(*seed);
    fisher_yates_shuffle(order, rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < count; at += batch_size) {
    const std::size_t end = std::min(count, at + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

// --- encoded-dataset cache file -------------------------------------------

inline nlohmann::json vocabulary_to_json(const ActivityVocabulary& v) {
  return nlohmann::json(v.index_to_label);
}

inline ActivityVocabulary vocabulary_from_json(const nlohmann::json& j) {
  ActivityVocabulary v;
  for (const auto& label : j) {
    v.index_to_label.push_back(label.get<std::string>());
    v.label_to_index.emplace(v.index_to_label.back(), v.size() - 1);
  }
  return v;
}

struct EncodedDataset {
  ActivityVocabulary vocab;
  TimeDivisors divisors;
  int k_max = 0;
  std::vector<EncodedPrefix> prefixes;
};

inline void save_dataset(const std::string& path, const EncodedDataset& ds) {
  Container c;
  nlohmann::json meta;
  meta["kind"] = "encoded-dataset";
  meta["vocabulary"] = vocabulary_to_json(ds.vocab);
  meta["d_between"] = ds.divisors.d_between;
  meta["d_since_start"] = ds.divisors.d_since_start;
  meta["k_max"] = ds.k_max;
  meta["num_prefixes"] = ds.prefixes.size();
  c.metadata = meta.dump();

  const std::size_t m = ds.prefixes.size();
  const int k_max = ds.k_max;
  const int n = m > 0 ? static_cast<int>(ds.prefixes[0].features.cols())
                      : feature_width(ds.vocab);
  NamedArray feats{{m, static_cast<std::uint64_t>(k_max), static_cast<std::uint64_t>(n)}, {}};
  feats.data.reserve(m * static_cast<std::size_t>(k_max) * static_cast<std::size_t>(n));
  NamedArray deltas{{m, static_cast<std::uint64_t>(k_max)}, {}};
  deltas.data.assign(m * static_cast<std::size_t>(k_max), 0.0);
  NamedArray lengths{{m}, {}};
  NamedArray next_act{{m}, {}};
  NamedArray next_dt{{m}, {}};
  for (std::size_t i = 0; i < m; ++i) {
    const EncodedPrefix& ep = ds.prefixes[i];
    for (int r = 0; r < k_max; ++r)
      for (int col = 0; col < n; ++col) feats.data.push_back(ep.features(r, col));
    for (int t = 0; t < ep.length; ++t)
      deltas.data[i * static_cast<std::size_t>(k_max) + static_cast<std::size_t>(k_max - ep.length + t)] =
          ep.deltas[static_cast<std::size_t>(t)];
    lengths.data.push_back(ep.length);
    next_act.data.push_back(ep.next_activity);
    next_dt.data.push_back(ep.next_time_delta);
  }
  c.arrays["features"] = std::move(feats);
  c.arrays["deltas"] = std::move(deltas);
  c.arrays["lengths"] = std::move(lengths);
  c.arrays["next_activity"] = std::move(next_act);
  c.arrays["next_time_delta"] = std::move(next_dt);
  write_container_file(path, c);
}

inline EncodedDataset load_dataset(const std::string& path) {
  const Container c = read_container_file(path);
  nlohmann::json meta = nlohmann::json::parse(c.metadata);
  if (meta.value("kind", "") != "encoded-dataset")
    throw DataError("'" + path + "' is not an encoded-dataset file");
  EncodedDataset ds;
  ds.vocab = vocabulary_from_json(meta.at("vocabulary"));
  ds.divisors.d_between = meta.at("d_between").get<double>();
  ds.divisors.d_since_start = meta.at("d_since_start").get<double>();
  ds.k_max = meta.at("k_max").get<int>();

  const NamedArray& feats = c.arrays.at("features");
  const NamedArray& deltas = c.arrays.at("deltas");
  const NamedArray& lengths = c.arrays.at("lengths");
  const NamedArray& next_act = c.arrays.at("next_activity");
  const NamedArray& next_dt = c.arrays.at("next_time_delta");
  if (feats.shape.size() != 3) throw DataError("dataset feature tensor must be rank 3");
  const std::size_t m = feats.shape[0];
  const int k_max = static_cast<int>(feats.shape[1]);
  const int n = static_cast<int>(feats.shape[2]);
  if (k_max != ds.k_max) throw DataError("dataset k_max mismatch");
  ds.prefixes.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    EncodedPrefix& ep = ds.prefixes[i];
    ep.features.resize(k_max, n);
    for (int r = 0; r < k_max; ++r)
      for (int col = 0; col < n; ++col)
        ep.features(r, col) =
            feats.data[(i * static_cast<std::size_t>(k_max) + static_cast<std::size_t>(r)) *
                           static_cast<std::size_t>(n) +
                       static_cast<std::size_t>(col)];
    ep.length = static_cast<int>(lengths.data[i]);
    ep.deltas.resize(static_cast<std::size_t>(ep.length));
    for (int t = 0; t < ep.length; ++t)
      ep.deltas[static_cast<std::size_t>(t)] =
          deltas.data[i * static_cast<std::size_t>(k_max) +
                      static_cast<std::size_t>(k_max - ep.length + t)];
    ep.next_activity = static_cast<int>(next_act.data[i]);
    ep.next_time_delta = next_dt.data[i];
  }
  return ds;
}

}  // namespace procast
