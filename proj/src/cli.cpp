/*
 * Copyright 2026 The zrforge Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "zrforge/cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "zrforge/error.hpp"
#include "zrforge/evaluation.hpp"
#include "zrforge/forecaster.hpp"
#include "zrforge/kg_data.hpp"
#include "zrforge/rel_semantics.hpp"
#include "zrforge/synth_gen.hpp"
#include "zrforge/trainer.hpp"
#include "zrforge/zeroshot_split.hpp"

namespace zrforge::cli {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> make_logger() {
  auto logger = std::make_shared<spdlog::logger>("zrforge", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  logger->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("ZRFORGE_LOG")) {
    level = spdlog::level::from_str(env);
    // from_str maps unknown names to off.
    if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::info;
  }
  logger->set_level(level);
  return logger;
}

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ModelArgs {
  std::string data_dir;
  std::string rel_emb;
  std::string config_file;
  std::vector<std::string> overrides;
};

TkgDataset load_with_reciprocals(const std::string& dir) {
  auto d = load_dataset(dir);
  add_reciprocals(d);
  return d;
}

TrainConfig resolve_config(const ModelArgs& args, const Common& common) {
  TrainConfig c = args.config_file.empty() ? TrainConfig{} : read_config(args.config_file);
  c.seed = common.seed;
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

void log_config(spdlog::logger& log, const TrainConfig& c) {
  for (const auto& [k, v] : config_entries(c)) log.info("config {}={}", k, v);
}

std::string rel_emb_path(const ModelArgs& args) {
  return args.rel_emb.empty() ? (fs::path(args.data_dir) / "rel_emb.zrle").string() : args.rel_emb;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

nlohmann::ordered_json log_json(const TrainLog& log) {
  nlohmann::ordered_json j;
  j["best_epoch"] = log.best_epoch;
  j["best_valid_mrr"] = log.best_valid_mrr;
  auto& epochs = j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"tkgf", e.tkgf},
                      {"hist", e.hist},
                      {"rhl", e.rhl},
                      {"valid_mrr", e.valid_mrr}});
  }
  return j;
}

TrainLog train_model(Forecaster& model, const TkgDataset& d, spdlog::logger& log) {
  return fit(model, d, [&](const EpochLog& e) {
    log.info("epoch {} loss {:.5f} (tkgf {:.5f} hist {:.5f} rhl {:.5f}) valid MRR {:.4f}", e.epoch, e.loss, e.tkgf,
             e.hist, e.rhl, e.valid_mrr);
  });
}

int cmd_synth(const SynthConfig& base, const std::string& out_dir, const Common& common, spdlog::logger& log,
              std::ostream& out) {
  SynthConfig c = base;
  c.seed = common.seed;
  log.info("synth seed={} entities={} clusters={} relations_per_cluster={} pairs={} train_steps={} eval_steps={} "
           "p={} holdout_share={}",
           c.seed, c.n_entities, c.n_clusters, c.relations_per_cluster, c.n_pairs, c.train_steps, c.eval_steps, c.p,
           c.holdout_share);
  const auto result = generate(c);
  write_synth(out_dir, result);
  out << "wrote " << result.facts.facts.size() << " facts to " << out_dir << '\n';
  return kOk;
}

int cmd_split(const std::string& facts, const std::string& out_dir, std::size_t threshold,
              const std::optional<std::string>& split_label, double fraction, spdlog::logger& log,
              std::ostream& out) {
  const auto source = read_quadruples(facts);
  SplitConfig config;
  config.freq_threshold = threshold;
  config.split_timestamp = split_label ? source.timeline.lower_bound(*split_label)
                                       : split_timestamp_for_fraction(source.facts, fraction);
  log.info("split facts={} threshold={} split_timestamp={} ({})", facts, threshold, config.split_timestamp,
           config.split_timestamp < source.timeline.size() ? source.timeline.label(config.split_timestamp) : "end");
  const auto result = build_zero_shot_dataset(source, config);
  if (result.partition.empty_unseen_warning) log.warn("no zero-shot relations at threshold {}", threshold);
  save_dataset(out_dir, result.dataset);
  out << "train " << result.dataset.train.size() << ", valid " << result.dataset.valid.size() << ", test "
      << result.dataset.test.size() << ", zero-shot relations " << result.partition.unseen.size() << '\n';
  return kOk;
}

int cmd_embed_mock(const std::string& data_dir, const std::string& out_path, std::uint32_t width,
                   const Common& common, spdlog::logger& log, std::ostream& out) {
  if (width == 0) throw std::invalid_argument("--width must be positive");
  const auto d = load_with_reciprocals(data_dir);
  const fs::path path = out_path.empty() ? fs::path(data_dir) / "rel_emb.zrle" : fs::path(out_path);
  log.info("embed-mock data_dir={} width={} seed={} out={}", data_dir, width, common.seed, path.string());
  const auto store = mock_store(d.relations, width, common.seed);
  write_zrle(path, store);
  write_rel_emb_json(fs::path(path).replace_extension(".json"), d.relations);
  out << "wrote text matrices for " << store.size() << " relations to " << path.string() << '\n';
  return kOk;
}

int cmd_train(const ModelArgs& args, const std::string& checkpoint, const std::string& log_path,
              const Common& common, spdlog::logger& log, std::ostream& out) {
  const auto d = load_with_reciprocals(args.data_dir);
  const auto config = resolve_config(args, common);
  log.info("train data_dir={} rel_emb={} checkpoint={}", args.data_dir, rel_emb_path(args), checkpoint);
  log_config(log, config);
  const auto texts = read_zrle(rel_emb_path(args));
  Forecaster model(d, texts, config);
  const auto train_log = train_model(model, d, log);
  if (fs::path(checkpoint).has_parent_path()) fs::create_directories(fs::path(checkpoint).parent_path());
  save_checkpoint(checkpoint, model);
  if (!log_path.empty()) write_text(log_path, log_json(train_log).dump(2) + "\n");
  out << "best epoch " << train_log.best_epoch << ", valid MRR " << train_log.best_valid_mrr << '\n';
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
             const std::string& out_path, spdlog::logger& log, std::ostream& out) {
  const auto selector = parse_split_selector(split);
  const auto d = load_with_reciprocals(data_dir);
  log.info("eval checkpoint={} data_dir={} split={} out={}", checkpoint, data_dir, split, out_path);
  const auto model = restore(d, read_checkpoint(checkpoint));
  log_config(log, model->config());
  const auto report = evaluate(*model, d, selector);
  if (!out_path.empty()) write_text(out_path, report_to_json(report) + "\n");
  out << report_table(report);
  return kOk;
}

int cmd_ablate(const ModelArgs& args, const std::string& out_path, const Common& common, spdlog::logger& log,
               std::ostream& out) {
  const auto d = load_with_reciprocals(args.data_dir);
  const auto config = resolve_config(args, common);
  log.info("ablate data_dir={} rel_emb={} out={}", args.data_dir, rel_emb_path(args), out_path);
  log_config(log, config);
  const auto texts = read_zrle(rel_emb_path(args));
  struct Row {
    const char* name;
    TrainConfig config;
  };
  std::vector<Row> rows{{"full", config}, {"-ERD-analog", config}, {"-RHL", config}};
  rows[1].config.random_frozen_rel_emb = true;
  rows[2].config.no_rhl = true;
  const std::string dataset = fs::path(args.data_dir).filename().string();
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  auto& jrows = j["rows"] = nlohmann::ordered_json::array();
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-12s %10s %10s %10s %10s %10s\n", "Dataset", "Model", "ZS MRR", "ZS H@1",
                "ZS H@10", "Seen MRR", "All MRR");
  std::string table = line;
  for (const auto& row : rows) {
    log.info("ablate row {}", row.name);
    Forecaster model(d, texts, row.config);
    train_model(model, d, log);
    const auto report = evaluate(model, d, SplitSelector::kBoth);
    jrows.push_back({{"name", row.name}, {"report", nlohmann::ordered_json::parse(report_to_json(report))}});
    std::snprintf(line, sizeof line, "%-12s %-12s %10.3f %10.3f %10.3f %10.3f %10.3f\n", dataset.c_str(), row.name,
                  report.zero_shot.mrr, report.zero_shot.hits1, report.zero_shot.hits10, report.seen.mrr,
                  report.overall.mrr);
    table += line;
  }
  if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
  out << table;
  return kOk;
}

void add_model_options(CLI::App* sub, ModelArgs& args) {
  sub->add_option("--data-dir", args.data_dir, "Split dataset directory")->required();
  sub->add_option("--rel-emb", args.rel_emb, "ZRLE text matrices (default: <data-dir>/rel_emb.zrle)");
  sub->add_option("--config", args.config_file, "Training config file (key=value lines)");
  sub->add_option("--set", args.overrides, "Config override key=value (repeatable)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot temporal knowledge graph forecasting with text-derived relation representations",
               "zrforge"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random choice");
  app.add_option("--threads", common.threads, "Upper bound on worker threads")->check(CLI::PositiveNumber);

  SynthConfig synth;
  std::string synth_out;
  auto* s_synth = app.add_subcommand("synth", "Generate the planted synthetic benchmark");
  s_synth->add_option("--out", synth_out, "Output directory")->required();
  s_synth->add_option("--entities", synth.n_entities, "Number of entities")->capture_default_str();
  s_synth->add_option("--clusters", synth.n_clusters, "Relation clusters")->capture_default_str();
  s_synth->add_option("--relations-per-cluster", synth.relations_per_cluster)->capture_default_str();
  s_synth->add_option("--holdout-per-cluster", synth.holdout_per_cluster)->capture_default_str();
  s_synth->add_option("--pairs", synth.n_pairs, "Planted entity pairs")->capture_default_str();
  s_synth->add_option("--train-steps", synth.train_steps)->capture_default_str();
  s_synth->add_option("--eval-steps", synth.eval_steps)->capture_default_str();
  s_synth->add_option("--p", synth.p, "Per-step emission probability")->capture_default_str();
  s_synth->add_option("--holdout-share", synth.holdout_share)->capture_default_str();

  std::string split_facts, split_out;
  std::size_t threshold = 40;
  std::optional<std::string> split_label;
  double fraction = 0.75;
  auto* s_split = app.add_subcommand("split", "Build the zero-shot train/valid/test split");
  s_split->add_option("--facts", split_facts, "Quadruple TSV")->required();
  s_split->add_option("--out", split_out, "Output directory")->required();
  s_split->add_option("--threshold", threshold, "Zero-shot eval-frequency threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* split_ts = s_split->add_option("--split-timestamp", split_label, "First evaluation timestamp label");
  s_split->add_option("--train-fraction", fraction, "Share of facts before the split")
      ->capture_default_str()
      ->excludes(split_ts);

  std::string embed_dir, embed_out;
  std::uint32_t width = 64;
  auto* s_embed = app.add_subcommand("embed-mock", "Write deterministic mock text matrices");
  s_embed->add_option("--data-dir", embed_dir, "Split dataset directory")->required();
  s_embed->add_option("--out", embed_out, "ZRLE output (default: <data-dir>/rel_emb.zrle)");
  s_embed->add_option("--width", width, "Token row width")->capture_default_str();

  ModelArgs train_args;
  std::string checkpoint, train_log;
  auto* s_train = app.add_subcommand("train", "Train a forecaster");
  add_model_options(s_train, train_args);
  s_train->add_option("--checkpoint", checkpoint, "Checkpoint output")->required();
  s_train->add_option("--log", train_log, "Training log JSON output");

  std::string eval_ck, eval_dir, eval_split = "both", eval_out;
  auto* s_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  s_eval->add_option("--checkpoint", eval_ck, "Checkpoint")->required();
  s_eval->add_option("--data-dir", eval_dir, "Split dataset directory")->required();
  s_eval->add_option("--split", eval_split, "valid, test or both")
      ->check(CLI::IsMember({"valid", "test", "both"}))
      ->capture_default_str();
  s_eval->add_option("--out", eval_out, "Report JSON output");

  ModelArgs ablate_args;
  std::string ablate_out;
  auto* s_ablate = app.add_subcommand("ablate", "Train full, random-text and no-history models and compare");
  add_model_options(s_ablate, ablate_args);
  s_ablate->add_option("--out", ablate_out, "Comparison JSON output");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  auto log = make_logger();
  log->info("zrforge seed={} threads={}", common.seed, common.threads);
  try {
    if (*s_synth) return cmd_synth(synth, synth_out, common, *log, out);
    if (*s_split) return cmd_split(split_facts, split_out, threshold, split_label, fraction, *log, out);
    if (*s_embed) return cmd_embed_mock(embed_dir, embed_out, width, common, *log, out);
    if (*s_train) return cmd_train(train_args, checkpoint, train_log, common, *log, out);
    if (*s_eval) return cmd_eval(eval_ck, eval_dir, eval_split, eval_out, *log, out);
    if (*s_ablate) return cmd_ablate(ablate_args, ablate_out, common, *log, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace zrforge::cli
