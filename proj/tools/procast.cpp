#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "procast/checkpoint.hpp"
#include "procast/eval.hpp"
#include "procast/eventlog.hpp"
#include "procast/manifest.hpp"
#include "procast/model.hpp"
#include "procast/selfcheck.hpp"
#include "procast/version.hpp"

namespace procast {
namespace {

namespace fs = std::filesystem;

// Column/format flags shared by every command that reads CSV.
struct SchemaFlags {
  CsvSchema schema;

  void attach(CLI::App* cmd) {
    cmd->add_option("--case-col", schema.case_column, "Case id column name")
        ->capture_default_str()
        ->envname("PROCAST_CASE_COL");
    cmd->add_option("--activity-col", schema.activity_column, "Activity column name")
        ->capture_default_str()
        ->envname("PROCAST_ACTIVITY_COL");
    cmd->add_option("--ts-col", schema.timestamp_column, "Timestamp column name")
        ->capture_default_str()
        ->envname("PROCAST_TS_COL");
    cmd->add_option("--ts-format", schema.timestamp_format, "Timestamp strftime format")
        ->capture_default_str()
        ->envname("PROCAST_TS_FORMAT");
  }

  nlohmann::json to_json() const {
    return {{"case_col", schema.case_column},
            {"activity_col", schema.activity_column},
            {"ts_col", schema.timestamp_column},
            {"ts_format", schema.timestamp_format}};
  }
};

EventLog load_log_file(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  EventLog log = parse_csv(in, schema);
  std::fprintf(stderr, "loaded %zu cases, %zu events from %s\n", log.traces.size(),
               log.num_events(), path.c_str());
  return log;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

// Training inputs derived from a split directory. Vocabulary, divisors and
// k_max come from the train part alone, so nothing leaks from validation.
struct DataBundle {
  ActivityVocabulary vocab;
  TimeDivisors divisors;
  int k_max = 0;
  std::vector<EncodedPrefix> train;
  std::vector<EncodedPrefix> val;
  ClassWeights weights;
};

DataBundle load_training_data(const std::string& dir, const CsvSchema& schema) {
  EventLog train_log = load_log_file(dir + "/train.csv", schema);
  EventLog val_log = load_log_file(dir + "/val.csv", schema);
  DataBundle d;
  d.vocab = build_vocabulary(train_log);
  d.divisors = compute_divisors(train_log);
  d.k_max = compute_k_max(train_log);
  d.train = encode_log(train_log, d.vocab, d.divisors, d.k_max);
  d.val = encode_log(val_log, d.vocab, d.divisors, d.k_max);
  std::vector<int> labels;
  labels.reserve(d.train.size());
  for (const auto& ep : d.train) labels.push_back(ep.next_activity);
  d.weights = compute_class_weights(labels, d.vocab.size());
  std::fprintf(stderr, "encoded %zu train / %zu val prefixes, %d activities, k_max %d\n",
               d.train.size(), d.val.size(), d.vocab.size(), d.k_max);
  return d;
}

nlohmann::json model_config_flags(const ModelConfig& cfg) {
  return {{"cell", cfg.cell_kind == nn::CellKind::TLSTM ? "tlstm" : "lstm"},
          {"cost_sensitive", cfg.cost_sensitive},
          {"units", cfg.hidden_units},
          {"dropout", cfg.dropout_rate},
          {"lr", cfg.learning_rate},
          {"epochs", cfg.max_epochs},
          {"batch_size", cfg.batch_size},
          {"patience", cfg.patience},
          {"seed", cfg.seed}};
}

EpochCallback stderr_epoch_logger() {
  return [](int epoch, double train_loss, const LossParts& val, double secs) {
    std::fprintf(stderr, "epoch %3d  train %.6f  val_ce %.6f  val_mae %.6f  val_total %.6f  %.1fs\n",
                 epoch, train_loss, val.ce, val.mae, val.total(), secs);
  };
}

// --- split ------------------------------------------------------------------

struct SplitArgs {
  std::string input;
  std::string out_dir;
  double train_frac = 2.0 / 3.0;
  double val_frac = 0.2;
  std::string manifest_path;
  SchemaFlags schema;
};

void cmd_split(const SplitArgs& a) {
  RunManifest man;
  man.command = "split";
  man.started_at = utc_timestamp();
  man.config = {{"input", a.input},
                {"out", a.out_dir},
                {"train_frac", a.train_frac},
                {"val_frac", a.val_frac},
                {"schema", a.schema.to_json()}};
  manifest_add_input(man, a.input);

  EventLog log = load_log_file(a.input, a.schema.schema);
  SplitLog split = temporal_split(log, a.train_frac, a.val_frac);
  fs::create_directories(a.out_dir);
  write_text_file(a.out_dir + "/train.csv", write_csv(split.train, a.schema.schema));
  write_text_file(a.out_dir + "/val.csv", write_csv(split.val, a.schema.schema));
  write_text_file(a.out_dir + "/test.csv", write_csv(split.test, a.schema.schema));

  man.finished_at = utc_timestamp();
  const std::string man_path =
      a.manifest_path.empty() ? a.out_dir + "/split_manifest.json" : a.manifest_path;
  write_manifest(man_path, man);

  nlohmann::json summary{{"train_cases", split.train.traces.size()},
                         {"val_cases", split.val.traces.size()},
                         {"test_cases", split.test.traces.size()},
                         {"train_events", split.train.num_events()},
                         {"val_events", split.val.num_events()},
                         {"test_events", split.test.num_events()},
                         {"out", a.out_dir}};
  std::printf("%s\n", summary.dump().c_str());
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::string out_path;
  std::string cell = "lstm";
  bool cost_sensitive = false;
  ModelConfig cfg;
  std::string manifest_path;
  SchemaFlags schema;

  ModelConfig resolved_config() const {
    ModelConfig c = cfg;
    c.cell_kind = cell == "tlstm" ? nn::CellKind::TLSTM : nn::CellKind::LSTM;
    c.cost_sensitive = cost_sensitive;
    return c;
  }
};

void attach_model_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--cell", a.cell, "Recurrent cell: lstm or tlstm")
      ->check(CLI::IsMember({"lstm", "tlstm"}))
      ->capture_default_str()
      ->envname("PROCAST_CELL");
  cmd->add_flag("--cost-sensitive", a.cost_sensitive, "Weight the classification loss by class")
      ->envname("PROCAST_COST_SENSITIVE");
  cmd->add_option("--epochs", a.cfg.max_epochs, "Maximum training epochs")
      ->capture_default_str()
      ->envname("PROCAST_EPOCHS");
  cmd->add_option("--batch-size", a.cfg.batch_size, "Mini-batch size")
      ->capture_default_str()
      ->envname("PROCAST_BATCH_SIZE");
  cmd->add_option("--patience", a.cfg.patience, "Early-stopping patience in epochs")
      ->capture_default_str()
      ->envname("PROCAST_PATIENCE");
  cmd->add_option("--seed", a.cfg.seed, "Seed for every random draw")
      ->capture_default_str()
      ->envname("PROCAST_SEED");
}

void cmd_train(const TrainArgs& a) {
  ModelConfig cfg = a.resolved_config();
  cfg.validate();  // reject bad flags before touching any data

  RunManifest man;
  man.command = "train";
  man.started_at = utc_timestamp();
  man.seed = cfg.seed;
  man.config = model_config_flags(cfg);
  man.config["data"] = a.data_dir;
  man.config["out"] = a.out_path;
  man.config["schema"] = a.schema.to_json();
  manifest_add_input(man, a.data_dir + "/train.csv");
  manifest_add_input(man, a.data_dir + "/val.csv");

  DataBundle d = load_training_data(a.data_dir, a.schema.schema);
  Checkpoint ckpt;
  ckpt.model.init(cfg, d.vocab.size(), feature_width(d.vocab), d.weights);
  TrainHistory history = train_model(ckpt.model, d.train, d.val, stderr_epoch_logger());
  ckpt.vocab = d.vocab;
  ckpt.divisors = d.divisors;
  ckpt.k_max = d.k_max;
  save_checkpoint(a.out_path, ckpt);

  man.finished_at = utc_timestamp();
  const std::string man_path =
      a.manifest_path.empty() ? a.out_path + ".manifest.json" : a.manifest_path;
  write_manifest(man_path, man);

  const double best_val = *std::min_element(history.val_total.begin(), history.val_total.end());
  nlohmann::json summary{{"checkpoint", a.out_path},
                         {"variant", cfg.variant_name()},
                         {"epochs_run", history.val_total.size()},
                         {"best_epoch", history.best_epoch},
                         {"best_val_total", best_val},
                         {"stopped_early", history.stopped_early}};
  std::printf("%s\n", summary.dump().c_str());
}

// --- gridsearch -------------------------------------------------------------

struct GridArgs {
  TrainArgs base;  // data/out/cell/cost-sensitive/epochs/... reused
  int threads = 1;
};

std::string grid_point_file(const GridPoint& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "cfg_u%d_d%g_lr%g.bin", p.hidden_units, p.dropout_rate,
                p.learning_rate);
  return buf;
}

nlohmann::json grid_result_json(const GridResult& r) {
  return {{"units", r.point.hidden_units},   {"dropout", r.point.dropout_rate},
          {"lr", r.point.learning_rate},     {"val_total", r.val_total},
          {"best_epoch", r.best_epoch},      {"diverged", r.diverged},
          {"checkpoint", grid_point_file(r.point)}};
}

// Completed configurations are read back from the results file, so an
// interrupted search resumes instead of retraining them.
std::vector<GridResult> read_grid_results(const std::string& path) {
  std::vector<GridResult> done;
  std::ifstream in(path);
  if (!in) return done;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    GridResult r;
    r.point = GridPoint{j.at("units").get<int>(), j.at("dropout").get<double>(),
                        j.at("lr").get<double>()};
    r.val_total = j.at("val_total").get<double>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.diverged = j.at("diverged").get<bool>();
    done.push_back(r);
  }
  return done;
}

void cmd_gridsearch(const GridArgs& g) {
  const TrainArgs& a = g.base;
  ModelConfig base = a.resolved_config();
  base.validate();

  RunManifest man;
  man.command = "gridsearch";
  man.started_at = utc_timestamp();
  man.seed = base.seed;
  man.config = model_config_flags(base);
  man.config["data"] = a.data_dir;
  man.config["out"] = a.out_path;
  man.config["threads"] = g.threads;
  man.config["schema"] = a.schema.to_json();
  manifest_add_input(man, a.data_dir + "/train.csv");
  manifest_add_input(man, a.data_dir + "/val.csv");

  DataBundle d = load_training_data(a.data_dir, a.schema.schema);
  fs::create_directories(a.out_path);
  const std::string results_path = a.out_path + "/grid_results.jsonl";

  const std::vector<GridPoint> grid = default_grid();
  std::vector<GridResult> completed = read_grid_results(results_path);
  std::vector<GridPoint> todo;
  for (const GridPoint& p : grid) {
    bool seen = false;
    for (const GridResult& r : completed)
      if (r.point == p) seen = true;
    if (!seen) todo.push_back(p);
  }
  std::fprintf(stderr, "grid: %zu configurations, %zu already done, %zu to train\n", grid.size(),
               completed.size(), todo.size());

  if (!todo.empty()) {
    std::ofstream results_out(results_path, std::ios::app);
    if (!results_out) throw DataError("cannot write '" + results_path + "'");
    auto on_done = [&](const GridResult& r, MultitaskModel& model) {
      if (!r.diverged) {
        Checkpoint ckpt;
        ckpt.model = model;
        ckpt.vocab = d.vocab;
        ckpt.divisors = d.divisors;
        ckpt.k_max = d.k_max;
        save_checkpoint(a.out_path + "/" + grid_point_file(r.point), ckpt);
      }
      results_out << grid_result_json(r).dump() << "\n";
      results_out.flush();
      std::fprintf(stderr, "done units=%d dropout=%g lr=%g  val_total=%.6f%s\n",
                   r.point.hidden_units, r.point.dropout_rate, r.point.learning_rate, r.val_total,
                   r.diverged ? "  (diverged)" : "");
    };
    auto fresh = run_grid(todo, base, d.vocab.size(), feature_width(d.vocab), d.weights, d.train,
                          d.val, g.threads, on_done);
    completed.insert(completed.end(), fresh.begin(), fresh.end());
  }

  const GridPoint best = select_best(completed);
  {
    std::ifstream src(a.out_path + "/" + grid_point_file(best), std::ios::binary);
    if (!src) throw DataError("missing checkpoint for best configuration");
    std::ofstream dst(a.out_path + "/best.bin", std::ios::binary | std::ios::trunc);
    dst << src.rdbuf();
  }

  man.finished_at = utc_timestamp();
  const std::string man_path =
      a.manifest_path.empty() ? a.out_path + "/gridsearch_manifest.json" : a.manifest_path;
  write_manifest(man_path, man);

  std::printf("units  dropout  lr        val_total   best_epoch  diverged\n");
  for (const GridResult& r : completed)
    std::printf("%-5d  %-7g  %-8g  %-10.6f  %-10d  %s\n", r.point.hidden_units,
                r.point.dropout_rate, r.point.learning_rate, r.val_total, r.best_epoch,
                r.diverged ? "yes" : "no");
  std::printf("best: units=%d dropout=%g lr=%g -> %s/best.bin\n", best.hidden_units,
              best.dropout_rate, best.learning_rate, a.out_path.c_str());
}

// --- evaluate ---------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string format = "table";
  std::string out_path;
  std::string dataset;
  int batch_size = 64;
  std::string manifest_path;
  SchemaFlags schema;
};

void cmd_evaluate(const EvalArgs& a) {
  RunManifest man;
  man.command = "evaluate";
  man.started_at = utc_timestamp();
  man.config = {{"checkpoint", a.checkpoint}, {"data", a.data_dir},   {"format", a.format},
                {"out", a.out_path},          {"dataset", a.dataset}, {"batch_size", a.batch_size},
                {"schema", a.schema.to_json()}};
  manifest_add_input(man, a.checkpoint);
  manifest_add_input(man, a.data_dir + "/test.csv");

  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  EventLog test_log = load_log_file(a.data_dir + "/test.csv", a.schema.schema);
  auto test = encode_log(test_log, ckpt.vocab, ckpt.divisors, ckpt.k_max);
  EvalOptions opts;
  opts.batch_size = a.batch_size;
  fs::path dir = fs::path(a.data_dir).lexically_normal();
  if (dir.filename().empty()) dir = dir.parent_path();  // "data/" names "data"
  const std::string name = a.dataset.empty() ? dir.filename().string() : a.dataset;
  EvalReport report = evaluate(ckpt.model, test, ckpt.divisors, name, opts);

  man.finished_at = utc_timestamp();
  if (!a.out_path.empty()) write_text_file(a.out_path, report_to_json(report).dump(2) + "\n");
  const std::string man_path =
      a.manifest_path.empty()
          ? (a.out_path.empty() ? "evaluate_manifest.json" : a.out_path + ".manifest.json")
          : a.manifest_path;
  write_manifest(man_path, man);

  if (a.format == "rows") std::printf("%s", format_rows({report}).c_str());
  else std::printf("%s", format_table({report}).c_str());
}

// --- gradcheck --------------------------------------------------------------

struct GradArgs {
  std::uint64_t seed = 42;
  int trials = 10;
  std::string manifest_path = "gradcheck_manifest.json";
};

int cmd_gradcheck(const GradArgs& a) {
  if (a.trials < 1) throw UsageError("--trials must be at least 1");
  RunManifest man;
  man.command = "gradcheck";
  man.started_at = utc_timestamp();
  man.seed = a.seed;
  man.config = {{"trials", a.trials}};

  const auto results = run_selfchecks(a.seed, a.trials);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-28s %s  max_rel_err %.3e (tol %.0e)\n", r.name.c_str(),
                r.pass() ? "pass" : "FAIL", r.max_rel_error, r.tolerance);
    all_pass = all_pass && r.pass();
  }
  man.finished_at = utc_timestamp();
  write_manifest(a.manifest_path, man);
  if (!all_pass) throw NumericError("gradient check failed");
  return 0;
}

// --- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::string input;
  std::string out_path;
  std::string manifest_path;
  SchemaFlags schema;
};

// One output row per proper prefix: the predicted next activity and the
// absolute next timestamp (last event time + predicted delta). Prefixes with
// activities outside the model vocabulary produce an error row.
void cmd_predict(const PredictArgs& a) {
  RunManifest man;
  man.command = "predict";
  man.started_at = utc_timestamp();
  man.config = {{"checkpoint", a.checkpoint},
                {"input", a.input},
                {"out", a.out_path},
                {"schema", a.schema.to_json()}};
  manifest_add_input(man, a.checkpoint);
  manifest_add_input(man, a.input);

  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  EventLog log = load_log_file(a.input, a.schema.schema);

  struct Row {
    const Trace* trace = nullptr;
    int length = 0;
    std::string error;
    std::size_t encoded_index = 0;  // into `encodable` when error is empty
  };
  std::vector<Row> rows;
  std::vector<EncodedPrefix> encodable;
  for (const auto& trace : log.traces) {
    for (const RawPrefix& rp : generate_prefixes(trace)) {
      Row row;
      row.trace = &trace;
      row.length = rp.length;
      const std::size_t last = static_cast<std::size_t>(rp.length);
      const std::size_t first = last > static_cast<std::size_t>(ckpt.k_max)
                                    ? last - static_cast<std::size_t>(ckpt.k_max)
                                    : 0;
      try {
        encodable.push_back(
            encode_prefix_window(trace.events, first, last, ckpt.vocab, ckpt.divisors, ckpt.k_max));
        row.encoded_index = encodable.size() - 1;
      } catch (const DataError& e) {
        row.error = e.what();
      }
      rows.push_back(row);
    }
  }

  // Predictions for all encodable prefixes, batched.
  std::vector<int> pred_class(encodable.size());
  std::vector<double> pred_delta(encodable.size());
  if (!encodable.empty()) {
    std::mt19937_64 unused_rng(0);
    for (const auto& idx : batch_prefixes(encodable.size(), 64)) {
      ModelBatch batch = assemble_batch(encodable, idx);
      ForwardCache cache;
      model_forward(ckpt.model, batch, nn::Mode::Infer, unused_rng, cache);
      for (Eigen::Index b = 0; b < cache.probs.cols(); ++b) {
        pred_class[idx[static_cast<std::size_t>(b)]] = argmax_class(cache.probs, b);
        pred_delta[idx[static_cast<std::size_t>(b)]] = cache.time_pred(0, b);
      }
    }
  }

  std::string out;
  bool any_error = false;
  for (const Row& row : rows) {
    nlohmann::json j{{"case", row.trace->case_id}, {"prefix_length", row.length}};
    if (!row.error.empty()) {
      j["error"] = row.error;
      any_error = true;
    } else {
      const double delta_s = pred_delta[row.encoded_index] * ckpt.divisors.d_between;
      const std::int64_t last_ts =
          row.trace->events[static_cast<std::size_t>(row.length) - 1].timestamp;
      const std::int64_t pred_ts = last_ts + static_cast<std::int64_t>(std::llround(delta_s));
      j["next_activity"] = ckpt.vocab.index_to_label[static_cast<std::size_t>(
          pred_class[row.encoded_index])];
      j["next_timestamp"] = format_timestamp(pred_ts, a.schema.schema.timestamp_format);
    }
    out += j.dump() + "\n";
  }

  man.finished_at = utc_timestamp();
  if (!a.out_path.empty()) write_text_file(a.out_path, out);
  const std::string man_path =
      a.manifest_path.empty()
          ? (a.out_path.empty() ? "predict_manifest.json" : a.out_path + ".manifest.json")
          : a.manifest_path;
  write_manifest(man_path, man);

  std::printf("%s", out.c_str());
  if (any_error)
    throw DataError("some prefixes contain activities outside the model vocabulary");
}

}  // namespace
}  // namespace procast

int main(int argc, char** argv) {
  using namespace procast;
  CLI::App app{"Next-activity and next-timestamp prediction from event logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("procast ") + kVersion);

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Chronologically split an event log CSV");
  split->add_option("--input", split_args.input, "Event log CSV")
      ->required()
      ->envname("PROCAST_INPUT");
  split->add_option("--out", split_args.out_dir, "Output directory for train/val/test CSVs")
      ->required()
      ->envname("PROCAST_OUT");
  split->add_option("--train-frac", split_args.train_frac, "Fraction of cases for train+val")
      ->capture_default_str()
      ->envname("PROCAST_TRAIN_FRAC");
  split->add_option("--val-frac", split_args.val_frac, "Fraction of the pool for validation")
      ->capture_default_str()
      ->envname("PROCAST_VAL_FRAC");
  split->add_option("--manifest", split_args.manifest_path, "Manifest path override")
      ->envname("PROCAST_MANIFEST");
  split_args.schema.attach(split);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train one model configuration");
  train->add_option("--data", train_args.data_dir, "Directory with train.csv and val.csv")
      ->required()
      ->envname("PROCAST_DATA");
  train->add_option("--out", train_args.out_path, "Checkpoint output path")
      ->required()
      ->envname("PROCAST_OUT");
  attach_model_flags(train, train_args);
  train->add_option("--units", train_args.cfg.hidden_units, "Hidden units per recurrent layer")
      ->capture_default_str()
      ->envname("PROCAST_UNITS");
  train->add_option("--dropout", train_args.cfg.dropout_rate, "Dropout rate on each branch")
      ->capture_default_str()
      ->envname("PROCAST_DROPOUT");
  train->add_option("--lr", train_args.cfg.learning_rate, "Learning rate")
      ->capture_default_str()
      ->envname("PROCAST_LR");
  train->add_option("--manifest", train_args.manifest_path, "Manifest path override")
      ->envname("PROCAST_MANIFEST");
  train_args.schema.attach(train);

  GridArgs grid_args;
  auto* grid = app.add_subcommand("gridsearch", "Train the full hyperparameter grid");
  grid->add_option("--data", grid_args.base.data_dir, "Directory with train.csv and val.csv")
      ->required()
      ->envname("PROCAST_DATA");
  grid->add_option("--out", grid_args.base.out_path, "Output directory for checkpoints + results")
      ->required()
      ->envname("PROCAST_OUT");
  attach_model_flags(grid, grid_args.base);
  grid->add_option("--threads", grid_args.threads, "Concurrent configurations")
      ->capture_default_str()
      ->envname("PROCAST_THREADS");
  grid->add_option("--manifest", grid_args.base.manifest_path, "Manifest path override")
      ->envname("PROCAST_MANIFEST");
  grid_args.base.schema.attach(grid);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on test.csv");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Model checkpoint")
      ->required()
      ->envname("PROCAST_CHECKPOINT");
  eval->add_option("--data", eval_args.data_dir, "Directory with test.csv")
      ->required()
      ->envname("PROCAST_DATA");
  eval->add_option("--format", eval_args.format, "Output format: table or rows")
      ->check(CLI::IsMember({"table", "rows"}))
      ->capture_default_str()
      ->envname("PROCAST_FORMAT");
  eval->add_option("--out", eval_args.out_path, "Also write the report JSON here")
      ->envname("PROCAST_OUT");
  eval->add_option("--dataset", eval_args.dataset, "Dataset name for the report")
      ->envname("PROCAST_DATASET");
  eval->add_option("--batch-size", eval_args.batch_size, "Evaluation batch size")
      ->capture_default_str()
      ->envname("PROCAST_BATCH_SIZE");
  eval->add_option("--manifest", eval_args.manifest_path, "Manifest path override")
      ->envname("PROCAST_MANIFEST");
  eval_args.schema.attach(eval);

  GradArgs grad_args;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every operation");
  gradcheck->add_option("--seed", grad_args.seed, "Base seed")
      ->capture_default_str()
      ->envname("PROCAST_SEED");
  gradcheck->add_option("--trials", grad_args.trials, "Seeded trials per operation")
      ->capture_default_str()
      ->envname("PROCAST_TRIALS");
  gradcheck->add_option("--manifest", grad_args.manifest_path, "Manifest path override")
      ->envname("PROCAST_MANIFEST");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Predict next activity and timestamp per prefix");
  predict->add_option("--checkpoint", predict_args.checkpoint, "Model checkpoint")
      ->required()
      ->envname("PROCAST_CHECKPOINT");
  predict->add_option("--input", predict_args.input, "Event log CSV to predict on")
      ->required()
      ->envname("PROCAST_INPUT");
  predict->add_option("--out", predict_args.out_path, "Also write the rows here")
      ->envname("PROCAST_OUT");
  predict->add_option("--manifest", predict_args.manifest_path, "Manifest path override")
      ->envname("PROCAST_MANIFEST");
  predict_args.schema.attach(predict);

  try {
    app.parse(argc, argv);
    if (split->parsed()) cmd_split(split_args);
    else if (train->parsed()) cmd_train(train_args);
    else if (grid->parsed()) cmd_gridsearch(grid_args);
    else if (eval->parsed()) cmd_evaluate(eval_args);
    else if (gradcheck->parsed()) return cmd_gradcheck(grad_args);
    else if (predict->parsed()) cmd_predict(predict_args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  }
  return 0;
}
