// Batch command-line front end: corpus synthesis, feature re-derivation,
// training, evaluation, modality ablation and report re-formatting.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "handfuse/evaluation.hpp"
#include "handfuse/frame.hpp"
#include "handfuse/frame_csv.hpp"
#include "handfuse/pipeline.hpp"
#include "handfuse/serialization.hpp"
#include "handfuse/synthetic.hpp"

namespace fs = std::filesystem;
using namespace handfuse;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_run_manifest(const fs::path& output_dir, const std::string& command,
                        const nlohmann::json& config_echo,
                        const fs::path& corpus_root) {
  nlohmann::json m;
  m["command"] = command;
  m["config"] = config_echo;
  m["inputs"] = {{"corpus_root", corpus_root.string()},
                 {"corpus_hash", hex64(content_hash(corpus_root))}};
  write_json_file(output_dir / "manifest.json", m);
}

// Loads the config file, then lets explicit command-line flags win.
RunConfig load_config(const std::string& config_path,
                      const std::map<std::string, std::string>& overrides) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file: " + config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + config_path + ": " + e.what());
  }
  for (const auto& [key, raw] : overrides) {
    if (key == "corpus_root" || key == "output_dir" || key == "modality") {
      j[key] = raw;
    } else if (key == "seed") {
      j[key] = std::stoull(raw);
    } else if (key == "epochs") {
      j[key] = std::stoi(raw);
    } else {
      throw ConfigError("unknown override key: " + key);
    }
  }
  return RunConfig::from_json(j);
}

void add_override_flags(CLI::App* cmd, std::map<std::string, std::string>* o) {
  auto bind = [o](const std::string& key) {
    return [o, key](const std::string& v) { (*o)[key] = v; };
  };
  cmd->add_option_function<std::string>("--corpus-root", bind("corpus_root"),
                                        "Override corpus_root");
  cmd->add_option_function<std::string>("--output-dir", bind("output_dir"),
                                        "Override output_dir");
  cmd->add_option_function<std::string>("--seed", bind("seed"),
                                        "Override seed");
  cmd->add_option_function<std::string>("--epochs", bind("epochs"),
                                        "Override epochs");
  cmd->add_option_function<std::string>("--modality", bind("modality"),
                                        "Override modality");
}

int cmd_synth(int classes, int reps, const std::string& mode,
              std::uint64_t seed, double noise, int image_side,
              const std::string& out) {
  SynthSpec spec;
  spec.classes = classes;
  spec.reps = reps;
  spec.mode = synth_mode_from_string(mode);
  spec.seed = seed;
  spec.noise = noise;
  spec.image_side = image_side;
  generate_synthetic(out, spec);
  std::ifstream in(fs::path(out) / "manifest.json");
  nlohmann::json manifest;
  in >> manifest;
  std::cout << "wrote " << classes * reps << " repetitions under " << out
            << "\n"
            << manifest.dump(2) << "\n";
  return 0;
}

// Validates a raw frames.csv and recomputes every derived angle column
// from the stored positions.
int cmd_extract(const std::string& in_path, const std::string& out_path) {
  FrameTable table = read_frames_csv(in_path);
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    std::array<double, kFrameValues> row;
    for (int c = 0; c < kFrameValues; ++c) row[c] = table.values(r, c);
    auto [left, right] = unflatten_frame(row);
    const FrameVector derived =
        flatten_frame(derive_hand_features(left), derive_hand_features(right));
    for (int c = 0; c < kFrameValues; ++c) table.values(r, c) = derived[c];
  }
  write_frames_csv(out_path, table);
  std::cout << "re-derived " << table.values.rows() << " frames -> "
            << out_path << "\n";
  return 0;
}

int cmd_train(const std::string& config_path,
              const std::map<std::string, std::string>& overrides) {
  const RunConfig config = load_config(config_path, overrides);
  config.validate_paths();
  fs::create_directories(config.output_dir);

  const TrainOutcome outcome = run_training(config);
  const fs::path out_dir(config.output_dir);
  save_checkpoint(out_dir / "checkpoint.model", outcome.model,
                  outcome.data.labels, outcome.data.scaler, config.train);
  write_json_file(out_dir / "scaler.json", outcome.data.scaler.to_json());
  write_history_csv(out_dir / "history.csv", outcome.history);
  write_run_manifest(out_dir, "train", config.to_json(), config.corpus_root);
  std::cout << "trained " << outcome.history.epochs.size() << " epochs; final "
            << "val accuracy "
            << (outcome.history.epochs.empty()
                    ? 0.0
                    : outcome.history.epochs.back().val_accuracy)
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& corpus,
                 std::uint64_t seed, double train_frac, double val_frac,
                 double test_frac, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Dataset dataset = load_dataset(corpus, ckpt.model.spec.image_side);
  if (!(dataset.labels == ckpt.labels)) {
    throw LabelTableMismatch("checkpoint labels do not match the corpus at " +
                             corpus);
  }
  SplitSpec split_spec{train_frac, val_frac, test_frac, seed};
  const Split split = stratified_split(dataset.samples, split_spec);

  std::vector<int> truth;
  std::vector<int> pred;
  for (int idx : split.test) {
    const GestureSample& s = dataset.samples[idx];
    ModelInput input;
    input.frames = ckpt.scaler.transform(impute_nan(s.frames));
    input.image = s.image;
    input.label = s.class_index;
    truth.push_back(input.label);
    pred.push_back(predict(ckpt.model, input, ckpt.config.modality));
  }
  const EvaluationReport report =
      aggregate(confusion_matrix(truth, pred, dataset.labels.size()));

  fs::create_directories(out);
  const fs::path out_dir(out);
  write_text(out_dir / "report.txt", format_report(report, dataset.labels));
  write_json_file(out_dir / "report.json",
                  report_to_json(report, dataset.labels));
  write_confusion_csv(out_dir / "confusion.csv", report.confusion,
                      dataset.labels);
  nlohmann::json echo = {{"checkpoint", checkpoint_path},
                         {"corpus_root", corpus},
                         {"seed", seed},
                         {"train_frac", train_frac},
                         {"val_frac", val_frac},
                         {"test_frac", test_frac}};
  write_run_manifest(out_dir, "evaluate", echo, corpus);
  std::cout << "test accuracy " << report.accuracy << " over "
            << report.confusion.total() << " samples\n";
  return 0;
}

int cmd_ablate(const std::string& config_path,
               const std::map<std::string, std::string>& overrides) {
  const RunConfig config = load_config(config_path, overrides);
  config.validate_paths();
  fs::create_directories(config.output_dir);
  const fs::path out_dir(config.output_dir);

  const AblationOutcome outcome = run_ablation(config);
  std::ostringstream csv;
  csv << "modality,accuracy\n";
  for (std::size_t i = 0; i < outcome.rows.size(); ++i) {
    const AblationRow& row = outcome.rows[i];
    csv << to_string(row.modality) << ',' << format_value(row.accuracy) << '\n';
    const TrainOutcome& run = outcome.runs[i];
    TrainConfig tc = config.train;
    tc.modality = row.modality;
    save_checkpoint(
        out_dir / ("checkpoint_" + to_string(row.modality) + ".model"),
        run.model, run.data.labels, run.data.scaler, tc);
  }
  write_text(out_dir / "ablation.csv", csv.str());
  write_run_manifest(out_dir, "ablate", config.to_json(), config.corpus_root);
  std::cout << csv.str();
  return 0;
}

// Rebuilds the text table from an existing machine-readable report.
int cmd_report(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open report: " + in_path);
  nlohmann::json j;
  in >> j;

  std::vector<std::string> labels;
  for (const auto& row : j.at("per_class")) {
    labels.push_back(row.at("label").get<std::string>());
  }
  std::vector<std::string> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  LabelTable table(sorted);

  EvaluationReport report;
  const auto& rows = j.at("confusion");
  ConfusionMatrix cm(static_cast<int>(labels.size()));
  for (int t = 0; t < cm.classes(); ++t) {
    for (int p = 0; p < cm.classes(); ++p) {
      const int ti = table.index(labels[t]);
      const int pi = table.index(labels[p]);
      cm.at(ti, pi) = rows[t][p].get<long long>();
    }
  }
  report = aggregate(cm);
  write_text(out_path, format_report(report, table));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal gesture-recognition pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  int classes = 18, reps = 10, image_side = 64;
  std::string mode = "joint", out_path = "corpus";
  std::uint64_t seed = 0;
  double noise = 0.05;
  synth->add_option("--classes", classes, "Number of classes");
  synth->add_option("--reps", reps, "Repetitions per class");
  synth->add_option("--mode", mode, "joint or split_signal");
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--noise", noise, "Gaussian noise scale");
  synth->add_option("--image-side", image_side, "Side of the written PNGs");
  synth->add_option("--out", out_path, "Corpus root directory")->required();

  // extract
  auto* extract =
      app.add_subcommand("extract", "Validate a frames CSV and re-derive "
                                    "the angle columns from positions");
  std::string extract_in, extract_out;
  extract->add_option("--in", extract_in, "Input frames.csv")->required();
  extract->add_option("--out", extract_out, "Output frames.csv")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a model from a config");
  std::string train_config;
  std::map<std::string, std::string> train_overrides;
  train->add_option("--config", train_config, "Run config JSON")->required();
  add_override_flags(train, &train_overrides);

  // evaluate
  auto* evaluate =
      app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  std::string eval_ckpt, eval_corpus, eval_out = "eval";
  std::uint64_t eval_seed = 0;
  double train_frac = 0.70, val_frac = 0.15, test_frac = 0.15;
  evaluate->add_option("--checkpoint", eval_ckpt, "Checkpoint file")
      ->required();
  evaluate->add_option("--corpus", eval_corpus, "Corpus root")->required();
  evaluate->add_option("--seed", eval_seed, "Split seed");
  evaluate->add_option("--train-frac", train_frac, "Train fraction");
  evaluate->add_option("--val-frac", val_frac, "Validation fraction");
  evaluate->add_option("--test-frac", test_frac, "Test fraction");
  evaluate->add_option("--out", eval_out, "Output directory");

  // ablate
  auto* ablate =
      app.add_subcommand("ablate", "Train and score all three modalities");
  std::string ablate_config;
  std::map<std::string, std::string> ablate_overrides;
  ablate->add_option("--config", ablate_config, "Run config JSON")->required();
  add_override_flags(ablate, &ablate_overrides);

  // report
  auto* report =
      app.add_subcommand("report", "Re-format an existing report JSON as text");
  std::string report_in, report_out = "report.txt";
  report->add_option("--in", report_in, "report.json path")->required();
  report->add_option("--out", report_out, "Output text path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synth(classes, reps, mode, seed, noise, image_side, out_path);
    }
    if (extract->parsed()) return cmd_extract(extract_in, extract_out);
    if (train->parsed()) return cmd_train(train_config, train_overrides);
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_ckpt, eval_corpus, eval_seed, train_frac,
                          val_frac, test_frac, eval_out);
    }
    if (ablate->parsed()) return cmd_ablate(ablate_config, ablate_overrides);
    if (report->parsed()) return cmd_report(report_in, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
