#include "handfuse/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "handfuse/errors.hpp"
#include "handfuse/serialization.hpp"

namespace handfuse {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kKnownKeys = {
    "corpus_root",      "output_dir",     "seed",
    "train_frac",       "val_frac",       "test_frac",
    "epochs",           "learning_rate",  "rms_decay",
    "rms_epsilon",      "batch_size",     "dropout_rate",
    "l2_lambda",        "image_side",     "rotation_max_deg",
    "zoom_low",         "zoom_high",      "contrast_low",
    "contrast_high",    "augment_enabled", "modality",
    "freeze_backbone",  "backbone_weights", "representative_frame",
    "report_formats"};

template <typename T>
T require(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) {
    throw ConfigError("missing required config key: " + key);
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key has the wrong type: " + key);
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const std::string& key, T* out) {
  if (!j.contains(key)) return;
  try {
    *out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key has the wrong type: " + key);
  }
}

std::uint64_t fnv1a64(std::uint64_t h, const char* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_file(std::uint64_t h, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot hash file: " + path.string());
  }
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(h, buf, static_cast<std::size_t>(in.gcount()));
  }
  return h;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) ==
        kKnownKeys.end()) {
      throw ConfigError("unknown config key: " + key);
    }
  }
  RunConfig c;
  c.corpus_root = require<std::string>(j, "corpus_root");
  c.output_dir = require<std::string>(j, "output_dir");
  c.seed = require<std::uint64_t>(j, "seed");
  c.split.seed = c.seed;
  c.train.seed = c.seed;
  maybe(j, "train_frac", &c.split.train_frac);
  maybe(j, "val_frac", &c.split.val_frac);
  maybe(j, "test_frac", &c.split.test_frac);
  maybe(j, "epochs", &c.train.epochs);
  maybe(j, "learning_rate", &c.train.learning_rate);
  maybe(j, "rms_decay", &c.train.rms_decay);
  maybe(j, "rms_epsilon", &c.train.rms_epsilon);
  maybe(j, "batch_size", &c.train.batch_size);
  maybe(j, "dropout_rate", &c.train.dropout_rate);
  maybe(j, "l2_lambda", &c.train.l2_lambda);
  maybe(j, "image_side", &c.image_side);
  maybe(j, "rotation_max_deg", &c.train.augment.rotation_max_deg);
  maybe(j, "zoom_low", &c.train.augment.zoom_low);
  maybe(j, "zoom_high", &c.train.augment.zoom_high);
  maybe(j, "contrast_low", &c.train.augment.contrast_low);
  maybe(j, "contrast_high", &c.train.augment.contrast_high);
  maybe(j, "augment_enabled", &c.train.augment_enabled);
  if (j.contains("modality")) {
    c.train.modality = modality_from_string(require<std::string>(j, "modality"));
  }
  maybe(j, "freeze_backbone", &c.train.freeze_backbone);
  maybe(j, "backbone_weights", &c.backbone_weights);
  maybe(j, "representative_frame", &c.representative_frame);
  maybe(j, "report_formats", &c.report_formats);
  if (c.train.augment.zoom_low > 1.0 || c.train.augment.zoom_high < 1.0 ||
      c.train.augment.contrast_low > 1.0 || c.train.augment.contrast_high < 1.0 ||
      c.train.augment.rotation_max_deg < 0.0) {
    throw ConfigError("augmentation ranges must contain the identity");
  }
  return c;
}

RunConfig RunConfig::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " +
                      e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{
      {"corpus_root", corpus_root},
      {"output_dir", output_dir},
      {"seed", seed},
      {"train_frac", split.train_frac},
      {"val_frac", split.val_frac},
      {"test_frac", split.test_frac},
      {"epochs", train.epochs},
      {"learning_rate", train.learning_rate},
      {"rms_decay", train.rms_decay},
      {"rms_epsilon", train.rms_epsilon},
      {"batch_size", train.batch_size},
      {"dropout_rate", train.dropout_rate},
      {"l2_lambda", train.l2_lambda},
      {"image_side", image_side},
      {"rotation_max_deg", train.augment.rotation_max_deg},
      {"zoom_low", train.augment.zoom_low},
      {"zoom_high", train.augment.zoom_high},
      {"contrast_low", train.augment.contrast_low},
      {"contrast_high", train.augment.contrast_high},
      {"augment_enabled", train.augment_enabled},
      {"modality", to_string(train.modality)},
      {"freeze_backbone", train.freeze_backbone},
      {"backbone_weights", backbone_weights},
      {"representative_frame", representative_frame},
      {"report_formats", report_formats},
  };
}

void RunConfig::validate_paths() const {
  if (!fs::exists(corpus_root) || !fs::is_directory(corpus_root)) {
    throw ConfigError("corpus_root does not exist: " + corpus_root);
  }
  if (!backbone_weights.empty() && !fs::exists(backbone_weights)) {
    throw ConfigError("backbone_weights does not exist: " + backbone_weights);
  }
}

PreparedData prepare_data(const Dataset& dataset, const SplitSpec& split_spec) {
  PreparedData out;
  out.labels = dataset.labels;
  out.split = stratified_split(dataset.samples, split_spec);

  std::vector<Eigen::MatrixXd> train_frames;
  train_frames.reserve(out.split.train.size());
  for (int idx : out.split.train) {
    train_frames.push_back(impute_nan(dataset.samples[idx].frames));
  }
  out.scaler.fit(train_frames);

  auto build = [&](const std::vector<int>& indices) {
    std::vector<ModelInput> inputs;
    inputs.reserve(indices.size());
    for (int idx : indices) {
      const GestureSample& s = dataset.samples[idx];
      ModelInput input;
      input.frames = out.scaler.transform(impute_nan(s.frames));
      input.image = s.image;
      input.label = s.class_index;
      inputs.push_back(std::move(input));
    }
    return inputs;
  };
  out.train = build(out.split.train);
  out.val = build(out.split.val);
  out.test = build(out.split.test);
  return out;
}

TrainOutcome run_training(const RunConfig& config, const Dataset& dataset) {
  TrainOutcome outcome;
  outcome.data = prepare_data(dataset, config.split);

  ModelSpec spec;
  spec.classes = outcome.data.labels.size();
  spec.image_side = config.image_side;
  spec.dropout_rate = config.train.dropout_rate;
  spec.l2_lambda = config.train.l2_lambda;
  outcome.model = FusionModel::init(spec, config.seed);
  if (!config.backbone_weights.empty()) {
    load_backbone_weights(outcome.model, config.backbone_weights);
  }
  outcome.history =
      fit(outcome.model, outcome.data.train, outcome.data.val, config.train);
  return outcome;
}

TrainOutcome run_training(const RunConfig& config) {
  config.validate_paths();
  const Dataset dataset = load_dataset(config.corpus_root, config.image_side,
                                       config.representative_frame);
  return run_training(config, dataset);
}

EvaluationReport evaluate_model(const FusionModel& model,
                                const std::vector<ModelInput>& test,
                                Modality modality) {
  std::vector<int> truth;
  std::vector<int> pred;
  truth.reserve(test.size());
  pred.reserve(test.size());
  for (const ModelInput& input : test) {
    truth.push_back(input.label);
    pred.push_back(predict(model, input, modality));
  }
  return aggregate(confusion_matrix(truth, pred, model.spec.classes));
}

AblationOutcome run_ablation(const RunConfig& config) {
  config.validate_paths();
  const Dataset dataset = load_dataset(config.corpus_root, config.image_side,
                                       config.representative_frame);
  AblationOutcome outcome;
  for (Modality modality :
       {Modality::leap_only, Modality::image_only, Modality::fusion}) {
    RunConfig run = config;
    run.train.modality = modality;
    try {
      TrainOutcome trained = run_training(run, dataset);
      const EvaluationReport report =
          evaluate_model(trained.model, trained.data.test, modality);
      outcome.rows.push_back({modality, report.accuracy});
      outcome.runs.push_back(std::move(trained));
    } catch (const Error& e) {
      throw Error("[" + to_string(modality) + "] " + e.what());
    }
  }
  return outcome;
}

std::uint64_t content_hash(const fs::path& path) {
  std::uint64_t h = 14695981039346656037ULL;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file()) {
        files.push_back(entry.path());
      }
    }
    std::vector<std::pair<std::string, fs::path>> keyed;
    keyed.reserve(files.size());
    for (const auto& f : files) {
      keyed.emplace_back(f.lexically_relative(path).generic_string(), f);
    }
    std::sort(keyed.begin(), keyed.end());
    for (const auto& [rel, file] : keyed) {
      h = fnv1a64(h, rel.data(), rel.size());
      h = hash_file(h, file);
    }
  } else {
    h = hash_file(h, path);
  }
  return h;
}

}  // namespace handfuse
