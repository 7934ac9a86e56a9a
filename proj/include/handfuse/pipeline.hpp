#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "handfuse/dataset.hpp"
#include "handfuse/evaluation.hpp"
#include "handfuse/network.hpp"

namespace handfuse {

/// Flat JSON run configuration; every random choice flows from `seed`.
struct RunConfig {
  std::string corpus_root;
  std::string output_dir;
  std::uint64_t seed = 0;
  SplitSpec split;
  TrainConfig train;
  int image_side = 224;
  int representative_frame = kRepresentativeFrame;
  std::vector<std::string> report_formats = {"json", "csv", "text"};
  std::string backbone_weights;  // optional checkpoint to seed the backbone

  /// Parses the flat JSON document. Unknown keys and missing required
  /// keys raise ConfigError naming the key.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_json_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Checks that referenced paths exist. Throws ConfigError naming the
  /// offending key.
  void validate_paths() const;
};

/// Split, imputed, scaled and ready-to-train inputs. The scaler is fit
/// on the training split only and applied to all three.
struct PreparedData {
  LabelTable labels;
  MinMaxScaler scaler;
  Split split;
  std::vector<ModelInput> train;
  std::vector<ModelInput> val;
  std::vector<ModelInput> test;
};

PreparedData prepare_data(const Dataset& dataset, const SplitSpec& split_spec);

struct TrainOutcome {
  FusionModel model;
  TrainHistory history;
  PreparedData data;
};

/// Loads the corpus, prepares the data and trains one model per the
/// config. Pure computation: writes nothing.
TrainOutcome run_training(const RunConfig& config);

/// As run_training but over an already-loaded corpus (used by the
/// ablation, which shares one corpus across three runs).
TrainOutcome run_training(const RunConfig& config, const Dataset& dataset);

/// Test-split evaluation of a trained model.
EvaluationReport evaluate_model(const FusionModel& model,
                                const std::vector<ModelInput>& test,
                                Modality modality);

struct AblationRow {
  Modality modality;
  double accuracy;
};

struct AblationOutcome {
  std::vector<AblationRow> rows;  // leap_only, image_only, fusion order
  std::vector<TrainOutcome> runs;
};

/// Trains three models differing only in modality on one shared split
/// and reports each test accuracy.
AblationOutcome run_ablation(const RunConfig& config);

/// FNV-1a 64-bit content hash of a file, or of a whole directory tree
/// (sorted relative paths and file bytes).
std::uint64_t content_hash(const std::filesystem::path& path);

}  // namespace handfuse
