#include <gtest/gtest.h>

#include <sstream>

#include "procast/eval.hpp"
#include "procast/model.hpp"
#include "procast/rng.hpp"

namespace procast {
namespace {

TEST(ArgmaxClass, PicksMaxAndBreaksTiesLow) {
  nn::Matrix probs(4, 2);
  probs.col(0) << 0.1, 0.5, 0.3, 0.1;
  probs.col(1) << 0.4, 0.1, 0.4, 0.1;
  EXPECT_EQ(argmax_class(probs, 0), 1);
  EXPECT_EQ(argmax_class(probs, 1), 0);
}

TEST(ArgmaxClass, InvariantUnderMonotoneRescaling) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    nn::Matrix v(6, 1);
    for (int i = 0; i < 6; ++i) v(i, 0) = uniform01(rng);
    nn::Matrix scaled = 3.0 * v;
    nn::Matrix shifted = v.array() + 0.25;
    EXPECT_EQ(argmax_class(v, 0), argmax_class(scaled, 0));
    EXPECT_EQ(argmax_class(v, 0), argmax_class(shifted, 0));
  }
}

TEST(Accuracy, CountingLaw) {
  EXPECT_DOUBLE_EQ(accuracy({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy({1, 2, 3, 4}, {1, 0, 3, 0}), 0.5);
  EXPECT_DOUBLE_EQ(accuracy({0}, {1}), 0.0);
  EXPECT_THROW(accuracy({}, {}), UsageError);
  EXPECT_THROW(accuracy({1}, {1, 2}), UsageError);
}

TEST(MaeDays, UnitsAndLaws) {
  // Predictions and targets are in units of the between-event divisor; the
  // report converts the mean absolute error to days.
  const double d_between = 86400.0 * 2;  // two days
  EXPECT_DOUBLE_EQ(mae_days({1.0}, {0.5}, d_between), 1.0);
  EXPECT_DOUBLE_EQ(mae_days({0.5}, {1.0}, d_between), 1.0);  // symmetry
  EXPECT_DOUBLE_EQ(mae_days({1.0, 1.0}, {1.0, 3.0}, d_between), 2.0);
  EXPECT_DOUBLE_EQ(mae_days({2.0}, {2.0}, 12345.0), 0.0);
  // Homogeneity: doubling every error doubles the result.
  EXPECT_DOUBLE_EQ(mae_days({3.0}, {1.0}, d_between), 2.0 * mae_days({2.0}, {1.0}, d_between));
  EXPECT_THROW(mae_days({}, {}, d_between), UsageError);
}

struct EvalFixture {
  ActivityVocabulary vocab;
  TimeDivisors divisors;
  int k_max = 0;
  std::vector<EncodedPrefix> prefixes;
  MultitaskModel model;

  EvalFixture() {
    EventLog log;
    for (int c = 0; c < 6; ++c) {
      Trace t;
      t.case_id = "c" + std::to_string(c);
      std::int64_t ts = c * 500;
      for (int i = 0; i < 4; ++i) {
        t.events.push_back(Event{std::string(1, static_cast<char>('A' + (c + i) % 3)), ts});
        ts += 3600;
      }
      log.traces.push_back(std::move(t));
    }
    vocab = build_vocabulary(log);
    divisors = compute_divisors(log);
    k_max = compute_k_max(log);
    prefixes = encode_log(log, vocab, divisors, k_max);
    ModelConfig cfg;
    cfg.hidden_units = 6;
    cfg.seed = 3;
    model.init(cfg, vocab.size(), feature_width(vocab), nn::unit_weights(vocab.size()));
  }
};

TEST(Evaluate, CountsPrefixesAndIsDeterministic) {
  EvalFixture fx;
  EvalReport r1 = evaluate(fx.model, fx.prefixes, fx.divisors, "synthetic");
  EvalReport r2 = evaluate(fx.model, fx.prefixes, fx.divisors, "synthetic");
  EXPECT_EQ(r1.prefix_count, fx.prefixes.size());
  EXPECT_DOUBLE_EQ(r1.accuracy, r2.accuracy);
  EXPECT_DOUBLE_EQ(r1.mae_days, r2.mae_days);
  EXPECT_GE(r1.accuracy, 0.0);
  EXPECT_LE(r1.accuracy, 1.0);
  EXPECT_GE(r1.mae_days, 0.0);
  EXPECT_EQ(r1.dataset, "synthetic");
  EXPECT_EQ(r1.variant, "Tax");
}

TEST(Evaluate, BatchSizeDoesNotChangeResults) {
  EvalFixture fx;
  EvalOptions small;
  small.batch_size = 2;
  EvalOptions big;
  big.batch_size = 64;
  EvalReport a = evaluate(fx.model, fx.prefixes, fx.divisors, "s", small);
  EvalReport b = evaluate(fx.model, fx.prefixes, fx.divisors, "s", big);
  EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy);
  EXPECT_NEAR(a.mae_days, b.mae_days, 1e-12);
}

TEST(Evaluate, ClampOptionNeverIncreasesPredictions) {
  EvalFixture fx;
  EvalOptions clamp;
  clamp.clamp_negative_time = true;
  // Clamping changes only negative outputs; both runs stay finite and valid.
  EvalReport a = evaluate(fx.model, fx.prefixes, fx.divisors, "s");
  EvalReport b = evaluate(fx.model, fx.prefixes, fx.divisors, "s", clamp);
  EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy);
  EXPECT_TRUE(std::isfinite(b.mae_days));
}

TEST(Evaluate, EmptyTestSetRejected) {
  EvalFixture fx;
  std::vector<EncodedPrefix> empty;
  EXPECT_THROW(evaluate(fx.model, empty, fx.divisors, "s"), DataError);
}

TEST(Evaluate, ReportJsonFields) {
  EvalReport r;
  r.dataset = "helpdesk";
  r.variant = "Tax+CS";
  r.prefix_count = 123;
  r.accuracy = 0.7125;
  r.mae_days = 3.75;
  r.config.cost_sensitive = true;
  nlohmann::json j = report_to_json(r);
  EXPECT_EQ(j["dataset"], "helpdesk");
  EXPECT_EQ(j["variant"], "Tax+CS");
  EXPECT_EQ(j["n_prefixes"], 123);
  EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), 0.7125);
  EXPECT_DOUBLE_EQ(j["mae_days"].get<double>(), 3.75);
  EXPECT_EQ(j["config"]["cost_sensitive"], true);
}

TEST(Evaluate, RowAndTableFormats) {
  EvalReport r;
  r.dataset = "d";
  r.variant = "Tax";
  r.prefix_count = 10;
  r.accuracy = 0.5;
  r.mae_days = 1.25;
  std::string rows = format_rows({r, r});
  std::istringstream in(rows);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);  // each line parses on its own
    EXPECT_EQ(j["dataset"], "d");
    ++n;
  }
  EXPECT_EQ(n, 2);
  std::string table = format_table({r});
  EXPECT_NE(table.find("Tax"), std::string::npos);
  EXPECT_NE(table.find("accuracy"), std::string::npos);
}

}  // namespace
}  // namespace procast
