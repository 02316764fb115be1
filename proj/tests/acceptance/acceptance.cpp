// Acceptance suite: one numbered check per line, "pass" / "FAIL" / "skip".
// Checks 1-8 are property-based and self-contained. Checks 9-11 reproduce
// published benchmark numbers and need the public event log CSVs; they are
// skipped with a note when the files are absent.
//
// Dataset discovery: $PROCAST_DATA_DIR, else ./data, looking for
// helpdesk.csv and bpi_12_w.csv. Check 10 trains on the larger log for
// hours, so it additionally requires PROCAST_NIGHTLY=1.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "procast/eval.hpp"
#include "procast/eventlog.hpp"
#include "procast/model.hpp"
#include "procast/selfcheck.hpp"

namespace procast {
namespace {

namespace fs = std::filesystem;

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%2d  %-28s %s  %s\n", number, name.c_str(), pass ? "pass" : "FAIL",
              detail.c_str());
  if (!pass) ++g_failures;
}

void report_skip(int number, const std::string& name, const std::string& why) {
  std::printf("%2d  %-28s skip  %s\n", number, name.c_str(), why.c_str());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1: gradient correctness -------------------------------------------------

void check_gradients() {
  const auto results = run_selfchecks(42, 10);
  double worst = 0.0;
  std::string worst_name;
  bool pass = true;
  for (const auto& r : results) {
    pass = pass && r.pass();
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "10 ops x 10 trials, worst rel err %.2e (%s), tol 1e-4", worst,
                worst_name.c_str());
  report(1, "gradient correctness", pass, detail);
}

// --- 2: time-aware cell reductions --------------------------------------------

nn::Matrix random_signed(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = (2.0 * uniform01(rng) - 1.0) * s;
  return m;
}

void check_cell_reductions() {
  double worst = 0.0;
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    nn::TLSTMCellParams tcell;
    tcell.init(5, 4, rng, "t");
    nn::Matrix x = random_signed(4, 3, rng), h0 = random_signed(5, 3, rng),
               c0 = random_signed(5, 3, rng);

    // Elapsed time zero: the memory decomposition reassembles exactly.
    {
      nn::LSTMStepCache ca, cb;
      nn::Matrix ha, ca_, hb, cb_;
      nn::RowVector zero = nn::RowVector::Zero(3);
      nn::tlstm_cell_forward(tcell, x, h0, c0, zero, ca, ha, ca_);
      nn::lstm_cell_forward(tcell.base, x, h0, c0, cb, hb, cb_);
      worst = std::max(worst, (ha - hb).cwiseAbs().maxCoeff());
      worst = std::max(worst, (ca_ - cb_).cwiseAbs().maxCoeff());
    }

    // Zero decomposition weights: nothing is subtracted or decayed.
    {
      tcell.W_d.value.setZero();
      tcell.b_d.value.setZero();
      nn::RowVector deltas(3);
      deltas << 0.0, 3600.0 * uniform01(rng), 1e7 * uniform01(rng);
      nn::LSTMStepCache ca, cb;
      nn::Matrix ha, ca_, hb, cb_;
      nn::tlstm_cell_forward(tcell, x, h0, c0, deltas, ca, ha, ca_);
      nn::lstm_cell_forward(tcell.base, x, h0, c0, cb, hb, cb_);
      worst = std::max(worst, (ha - hb).cwiseAbs().maxCoeff());
      worst = std::max(worst, (ca_ - cb_).cwiseAbs().maxCoeff());
    }
  }
  char detail[120];
  std::snprintf(detail, sizeof detail, "20 trials, max |diff| %.2e, tol 1e-12", worst);
  report(2, "time-aware cell reductions", worst <= 1e-12, detail);
}

// --- 3: decay law -------------------------------------------------------------

void check_decay_law() {
  const double e = std::exp(1.0);
  bool pass = nn::decay(0.0) == 1.0;
  const double half_err = std::abs(nn::decay(e * e - e) - 0.5);
  pass = pass && half_err <= 1e-12;
  // 1000-point grid: 0 plus log-spaced values up to 1e9.
  std::vector<double> grid{0.0};
  for (int i = 0; i < 999; ++i)
    grid.push_back(std::pow(10.0, -3.0 + 12.0 * static_cast<double>(i) / 998.0));
  bool decreasing = true;
  for (std::size_t i = 1; i < grid.size(); ++i)
    decreasing = decreasing && nn::decay(grid[i]) < nn::decay(grid[i - 1]);
  pass = pass && decreasing;
  char detail[140];
  std::snprintf(detail, sizeof detail,
                "decay(0)=%.1f exact, |decay(e^2-e)-0.5|=%.1e, strictly decreasing on %zu points",
                nn::decay(0.0), half_err, grid.size());
  report(3, "elapsed-time decay law", pass, detail);
}

// --- 4: prefix oracle equivalence ----------------------------------------------

void check_prefix_oracle() {
  std::mt19937_64 rng(99);
  bool pass = true;
  std::size_t prefixes_checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Trace trace;
    trace.case_id = "t" + std::to_string(trial);
    const int len = 1 + static_cast<int>(rng() % 20);
    std::int64_t ts = 1500000000 + static_cast<std::int64_t>(rng() % 1000000);
    for (int i = 0; i < len; ++i) {
      trace.events.push_back(Event{std::string(1, static_cast<char>('a' + rng() % 6)), ts});
      ts += static_cast<std::int64_t>(rng() % 100000);
    }

    // Brute force: every strictly shorter head of the trace, labeled by the
    // event that follows it.
    std::vector<std::pair<int, Event>> expected;
    for (std::size_t k = 1; k < trace.events.size(); ++k)
      expected.emplace_back(static_cast<int>(k), trace.events[k]);

    const auto got = generate_prefixes(trace);
    pass = pass && got.size() == expected.size();
    for (std::size_t i = 0; i < std::min(got.size(), expected.size()); ++i) {
      pass = pass && got[i].length == expected[i].first &&
             got[i].next_activity == expected[i].second.activity &&
             got[i].next_timestamp == expected[i].second.timestamp;
    }
    prefixes_checked += expected.size();
    if (len == 1) pass = pass && got.empty();
  }
  char detail[120];
  std::snprintf(detail, sizeof detail, "50 traces (lengths 1-20), %zu prefixes matched exactly",
                prefixes_checked);
  report(4, "prefix enumeration oracle", pass, detail);
}

// --- 5: class-weight law --------------------------------------------------------

void check_class_weights() {
  bool pass = true;
  // Uniform counts: every weight is exactly 1.
  {
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c)
      for (int i = 0; i < 25; ++i) labels.push_back(c);
    ClassWeights w = compute_class_weights(labels, 4);
    for (double v : w.weight) pass = pass && v == 1.0;
  }
  // Random counts: sum(w_c * n_c) = N and the rarest class has the largest weight.
  std::mt19937_64 rng(5);
  double worst_sum_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 6);
    std::vector<int> labels;
    std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
    for (int i = 0; i < 200; ++i) {
      const int c = static_cast<int>(rng() % static_cast<std::uint64_t>(K));
      labels.push_back(c);
      ++counts[static_cast<std::size_t>(c)];
    }
    ClassWeights w = compute_class_weights(labels, K);
    double sum = 0.0;
    std::size_t rarest = 0, max_weight_class = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      sum += w.weight[c] * static_cast<double>(counts[c]);
      if (counts[c] != 0 && (counts[rarest] == 0 || counts[c] < counts[rarest])) rarest = c;
      if (w.weight[c] > w.weight[max_weight_class]) max_weight_class = c;
    }
    worst_sum_err = std::max(worst_sum_err, std::abs(sum - static_cast<double>(labels.size())));
    pass = pass && counts[max_weight_class] == counts[rarest];
  }
  pass = pass && worst_sum_err <= 1e-9;
  char detail[120];
  std::snprintf(detail, sizeof detail,
                "uniform=>1 exact; 20 trials sum(w*n)=N within %.1e; rarest maximal",
                worst_sum_err);
  report(5, "class-weight law", pass, detail);
}

// --- 6: pad invariance ----------------------------------------------------------

EventLog cyclic_log(int traces, int trace_len, int num_acts, std::int64_t gap) {
  EventLog log;
  for (int c = 0; c < traces; ++c) {
    Trace t;
    t.case_id = "case" + std::to_string(1000 + c);
    std::int64_t ts = static_cast<std::int64_t>(c) * 7200;
    for (int i = 0; i < trace_len; ++i) {
      t.events.push_back(Event{std::string(1, static_cast<char>('A' + (c + i) % num_acts)), ts});
      ts += gap;
    }
    log.traces.push_back(std::move(t));
  }
  return log;
}

void check_pad_invariance() {
  EventLog log = cyclic_log(6, 5, 3, 3600);
  ActivityVocabulary vocab = build_vocabulary(log);
  TimeDivisors div = compute_divisors(log);
  const int k_max = compute_k_max(log);
  double worst = 0.0;
  for (int extra : {1, 3, 7}) {
    auto tight = encode_log(log, vocab, div, k_max);
    auto wide = encode_log(log, vocab, div, k_max + extra);
    for (nn::CellKind kind : {nn::CellKind::LSTM, nn::CellKind::TLSTM}) {
      ModelConfig cfg;
      cfg.cell_kind = kind;
      cfg.hidden_units = 6;
      cfg.seed = 17;
      MultitaskModel m;
      m.init(cfg, vocab.size(), feature_width(vocab), nn::unit_weights(vocab.size()));
      std::vector<std::size_t> idx{0, 1, 5, 9};
      std::mt19937_64 rng(0);
      for (nn::Mode mode : {nn::Mode::Infer, nn::Mode::Train}) {
        ForwardCache ca, cb;
        ModelBatch a = assemble_batch(tight, idx);
        ModelBatch b = assemble_batch(wide, idx);
        model_forward(m, a, mode, rng, ca);
        model_forward(m, b, mode, rng, cb);
        worst = std::max(worst, (ca.probs - cb.probs).cwiseAbs().maxCoeff());
        worst = std::max(worst, (ca.time_pred - cb.time_pred).cwiseAbs().maxCoeff());
      }
    }
  }
  char detail[120];
  std::snprintf(detail, sizeof detail,
                "pad widths +1/+3/+7, both cells, both modes: max |diff| %.2e, tol 1e-12", worst);
  report(6, "pad invariance", worst <= 1e-12, detail);
}

// --- 7: overfit smoke test --------------------------------------------------------

struct Encoded {
  ActivityVocabulary vocab;
  TimeDivisors divisors;
  int k_max = 0;
  std::vector<EncodedPrefix> prefixes;
  ClassWeights weights;
};

Encoded encode_all(const EventLog& log) {
  Encoded e;
  e.vocab = build_vocabulary(log);
  e.divisors = compute_divisors(log);
  e.k_max = compute_k_max(log);
  e.prefixes = encode_log(log, e.vocab, e.divisors, e.k_max);
  std::vector<int> labels;
  for (const auto& ep : e.prefixes) labels.push_back(ep.next_activity);
  e.weights = compute_class_weights(labels, e.vocab.size());
  return e;
}

void check_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t gap = 3600;
  EventLog log = cyclic_log(200, 6, 5, gap);
  Encoded e = encode_all(log);
  bool pass = true;
  std::string detail;
  for (nn::CellKind kind : {nn::CellKind::LSTM, nn::CellKind::TLSTM}) {
    ModelConfig cfg;
    cfg.cell_kind = kind;
    cfg.hidden_units = 24;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 300;
    cfg.seed = 42;
    MultitaskModel m;
    m.init(cfg, e.vocab.size(), feature_width(e.vocab), e.weights);
    train_model(m, e.prefixes, e.prefixes);
    EvalReport r = evaluate(m, e.prefixes, e.divisors, "cyclic");
    const double mae_seconds = r.mae_days * 86400.0;
    const bool ok = r.accuracy >= 0.99 && mae_seconds <= 0.05 * static_cast<double>(gap);
    pass = pass && ok;
    char part[120];
    std::snprintf(part, sizeof part, "%s acc %.3f mae %.0fs%s", kind == nn::CellKind::LSTM
                  ? "lstm" : "tlstm", r.accuracy, mae_seconds, ok ? "" : " (below target)");
    detail += (detail.empty() ? "" : "; ") + std::string(part);
  }
  char timing[64];
  std::snprintf(timing, sizeof timing, " (%.0fs, targets acc>=0.99 mae<=%.0fs)",
                seconds_since(t0), 0.05 * static_cast<double>(gap));
  report(7, "overfit on cyclic log", pass, detail + timing);
}

// --- 8: time-signal separability -----------------------------------------------------

// Every example is two identical events; only the elapsed time between them
// differs, and it alone determines the label. The elapsed times reach the
// network exclusively through the recurrence's delta channel, so a model can
// separate the classes only if that channel carries signal.
std::vector<EncodedPrefix> gap_coded_examples(int count, std::mt19937_64& rng) {
  std::vector<EncodedPrefix> out;
  for (int i = 0; i < count; ++i) {
    const bool slow = (i % 2) == 1;
    EncodedPrefix ep;
    ep.features = Eigen::MatrixXd::Ones(2, 1);  // uninformative constant feature
    ep.length = 2;
    const double jitter = 0.5 + uniform01(rng);
    ep.deltas = {0.0, (slow ? 1e6 : 10.0) * jitter};
    ep.next_activity = slow ? 1 : 0;
    ep.next_time_delta = 1.0;
    out.push_back(std::move(ep));
  }
  return out;
}

void check_time_signal() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(123);
  auto train = gap_coded_examples(200, rng);
  auto test = gap_coded_examples(100, rng);
  TimeDivisors unit_div;  // reporting scale only

  double tlstm_acc = 0.0, lstm_acc = 0.0;
  for (nn::CellKind kind : {nn::CellKind::TLSTM, nn::CellKind::LSTM}) {
    ModelConfig cfg;
    cfg.cell_kind = kind;
    cfg.hidden_units = 8;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 150;
    cfg.patience = cfg.max_epochs;  // CE plateaus near ln 2 before the delta signal
                                    // breaks symmetry; default patience stops too early
    cfg.seed = 42;
    MultitaskModel m;
    m.init(cfg, 2, 1, nn::unit_weights(2));
    train_model(m, train, train);
    EvalReport r = evaluate(m, test, unit_div, "gap-coded");
    if (kind == nn::CellKind::TLSTM) tlstm_acc = r.accuracy;
    else lstm_acc = r.accuracy;
  }
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "tlstm acc %.3f (target >= 0.95); plain lstm %.3f sees no signal (%.0fs)",
                tlstm_acc, lstm_acc, seconds_since(t0));
  report(8, "time-signal separability", tlstm_acc >= 0.95, detail);
}

// --- 9-11: benchmark reproduction ------------------------------------------------------

struct BenchmarkSpec {
  std::string file;
  std::size_t cases, events, activities, max_len;
};

fs::path data_dir() {
  const char* env = std::getenv("PROCAST_DATA_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("data");
}

EventLog load_benchmark(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in);
}

bool check_ingestion_one(const fs::path& path, const BenchmarkSpec& spec, std::string& detail) {
  EventLog log = load_benchmark(path);
  LogStats stats = validate_log(log);
  char buf[200];
  const bool ok = stats.num_cases == spec.cases && stats.num_events == spec.events &&
                  stats.num_activities == spec.activities && stats.max_trace_length == spec.max_len;
  std::snprintf(buf, sizeof buf, "%s: %zu/%zu/%zu max %zu (want %zu/%zu/%zu max %zu)",
                spec.file.c_str(), stats.num_cases, stats.num_events, stats.num_activities,
                stats.max_trace_length, spec.cases, spec.events, spec.activities, spec.max_len);
  detail += (detail.empty() ? "" : "; ") + std::string(buf);
  return ok;
}

struct BenchResult {
  double tax_acc = 0.0, tax_mae = 0.0, cs_mae = 0.0, cs_tlstm_acc = 0.0;
};

// The pinned reproduction protocol: chronological 2/3 : 1/3 split with 20%
// of the pool for validation, units 100, dropout 0, lr 0.002, batch 64,
// patience 25, max 150 epochs, seed 42.
BenchResult run_benchmark(const EventLog& log) {
  SplitLog split = temporal_split(log);
  ActivityVocabulary vocab = build_vocabulary(split.train);
  TimeDivisors div = compute_divisors(split.train);
  const int k_max = compute_k_max(split.train);
  auto train = encode_log(split.train, vocab, div, k_max);
  auto val = encode_log(split.val, vocab, div, k_max);
  auto test = encode_log(split.test, vocab, div, k_max);
  std::vector<int> labels;
  for (const auto& ep : train) labels.push_back(ep.next_activity);
  ClassWeights weights = compute_class_weights(labels, vocab.size());

  auto run_variant = [&](nn::CellKind kind, bool cs) {
    ModelConfig cfg;
    cfg.cell_kind = kind;
    cfg.cost_sensitive = cs;
    cfg.hidden_units = 100;
    cfg.dropout_rate = 0.0;
    cfg.learning_rate = 0.002;
    cfg.seed = 42;
    MultitaskModel m;
    m.init(cfg, vocab.size(), feature_width(vocab), weights);
    const auto t0 = std::chrono::steady_clock::now();
    train_model(m, train, val);
    EvalReport r = evaluate(m, test, div, "benchmark");
    std::fprintf(stderr, "  %s: acc %.4f mae %.4f days (%.0fs)\n", cfg.variant_name().c_str(),
                 r.accuracy, r.mae_days, seconds_since(t0));
    return r;
  };

  BenchResult b;
  EvalReport tax = run_variant(nn::CellKind::LSTM, false);
  b.tax_acc = tax.accuracy;
  b.tax_mae = tax.mae_days;
  b.cs_mae = run_variant(nn::CellKind::LSTM, true).mae_days;
  b.cs_tlstm_acc = run_variant(nn::CellKind::TLSTM, true).accuracy;
  return b;
}

void check_benchmark(int number, const std::string& name, const fs::path& path, double want_acc,
                     double acc_tol, double want_mae, double mae_tol, double want_cs_mae,
                     double cs_mae_tol) {
  const auto t0 = std::chrono::steady_clock::now();
  BenchResult b = run_benchmark(load_benchmark(path));
  const bool acc_ok = std::abs(b.tax_acc - want_acc) <= acc_tol;
  const bool mae_ok = std::abs(b.tax_mae - want_mae) <= mae_tol;
  const bool cs_ok = std::abs(b.cs_mae - want_cs_mae) <= cs_mae_tol;
  const bool dir_ok = b.cs_tlstm_acc >= b.tax_acc;
  char detail[240];
  std::snprintf(detail, sizeof detail,
                "acc %.3f (want %.3f+-%.2f), mae %.2f (want %.2f+-%.1f), cs mae %.2f (want "
                "%.2f+-%.1f), tlstm acc %.3f >= baseline %s (%.0fs)",
                b.tax_acc, want_acc, acc_tol, b.tax_mae, want_mae, mae_tol, b.cs_mae, want_cs_mae,
                cs_mae_tol, b.cs_tlstm_acc, dir_ok ? "yes" : "NO", seconds_since(t0));
  report(number, name, acc_ok && mae_ok && cs_ok && dir_ok, detail);
}

}  // namespace
}  // namespace procast

int main() {
  using namespace procast;
  const auto t0 = std::chrono::steady_clock::now();

  check_gradients();
  check_cell_reductions();
  check_decay_law();
  check_prefix_oracle();
  check_class_weights();
  check_pad_invariance();
  check_overfit();
  check_time_signal();

  const BenchmarkSpec helpdesk{"helpdesk.csv", 3804, 13710, 9, 14};
  const BenchmarkSpec bpi12w{"bpi_12_w.csv", 9658, 72413, 6, 74};
  const fs::path dir = data_dir();
  const fs::path helpdesk_path = dir / helpdesk.file;
  const fs::path bpi_path = dir / bpi12w.file;
  const bool have_helpdesk = fs::exists(helpdesk_path);
  const bool have_bpi = fs::exists(bpi_path);
  const char* nightly = std::getenv("PROCAST_NIGHTLY");
  const bool run_nightly = nightly != nullptr && std::string(nightly) == "1";

  try {
    if (have_helpdesk)
      check_benchmark(9, "helpdesk reproduction", helpdesk_path, 0.712, 0.03, 3.75, 0.5, 2.87,
                      0.5);
    else
      report_skip(9, "helpdesk reproduction",
                  "place helpdesk.csv under " + dir.string() + "/ (or set PROCAST_DATA_DIR)");

    if (have_bpi && run_nightly)
      check_benchmark(10, "bpi12w reproduction", bpi_path, 0.760, 0.03, 1.56, 0.4, 0.88, 0.3);
    else if (have_bpi)
      report_skip(10, "bpi12w reproduction", "multi-hour run; set PROCAST_NIGHTLY=1 to enable");
    else
      report_skip(10, "bpi12w reproduction",
                  "place bpi_12_w.csv under " + dir.string() + "/ (or set PROCAST_DATA_DIR)");

    if (have_helpdesk || have_bpi) {
      std::string detail;
      bool ok = true;
      if (have_helpdesk) ok = check_ingestion_one(helpdesk_path, helpdesk, detail) && ok;
      if (have_bpi) ok = check_ingestion_one(bpi_path, bpi12w, detail) && ok;
      report(11, "ingestion statistics", ok, detail);
    } else {
      report_skip(11, "ingestion statistics", "no benchmark CSVs found under " + dir.string());
    }
  } catch (const std::exception& e) {
    std::printf("benchmark checks aborted: %s\n", e.what());
    ++g_failures;
  }

  std::printf("%s (%d failure%s, %.0fs total)\n", g_failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              g_failures, g_failures == 1 ? "" : "s", seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
