#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "handfuse/errors.hpp"
#include "handfuse/pipeline.hpp"
#include "handfuse/synthetic.hpp"

using namespace handfuse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() /
                       ("pipeline_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json minimal_config() {
  return {{"corpus_root", "corpus"}, {"output_dir", "out"}, {"seed", 1}};
}

}  // namespace

TEST_CASE("config parsing accepts the full key set and rejects strangers") {
  nlohmann::json j = minimal_config();
  j["epochs"] = 4;
  j["learning_rate"] = 0.5;
  j["modality"] = "leap_only";
  j["image_side"] = 32;
  j["report_formats"] = {"json"};
  const RunConfig c = RunConfig::from_json(j);
  CHECK(c.corpus_root == "corpus");
  CHECK(c.seed == 1);
  CHECK(c.split.seed == 1);
  CHECK(c.train.seed == 1);
  CHECK(c.train.epochs == 4);
  CHECK(c.train.learning_rate == 0.5);
  CHECK(c.train.modality == Modality::leap_only);
  CHECK(c.image_side == 32);
  CHECK(c.report_formats == std::vector<std::string>{"json"});

  nlohmann::json unknown = minimal_config();
  unknown["learning_rat"] = 0.5;  // typo must be caught, not ignored
  CHECK_THROWS_AS(RunConfig::from_json(unknown), ConfigError);
  try {
    RunConfig::from_json(unknown);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learning_rat") != std::string::npos);
  }

  nlohmann::json missing = minimal_config();
  missing.erase("seed");
  CHECK_THROWS_AS(RunConfig::from_json(missing), ConfigError);
  try {
    RunConfig::from_json(missing);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }

  nlohmann::json wrong_type = minimal_config();
  wrong_type["epochs"] = "many";
  CHECK_THROWS_AS(RunConfig::from_json(wrong_type), ConfigError);

  nlohmann::json bad_zoom = minimal_config();
  bad_zoom["zoom_low"] = 1.5;  // range no longer brackets the identity
  CHECK_THROWS_AS(RunConfig::from_json(bad_zoom), ConfigError);
}

TEST_CASE("config json round-trips") {
  nlohmann::json j = minimal_config();
  j["epochs"] = 9;
  j["modality"] = "image_only";
  j["freeze_backbone"] = true;
  const RunConfig c = RunConfig::from_json(j);
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.train.epochs == 9);
  CHECK(back.train.freeze_backbone);
}

TEST_CASE("validate_paths names missing locations") {
  RunConfig c = RunConfig::from_json(minimal_config());
  c.corpus_root = "/definitely/not/here";
  CHECK_THROWS_AS(c.validate_paths(), ConfigError);
}

TEST_CASE("content hashes are stable and sensitive") {
  const fs::path dir = scratch("hash");
  std::ofstream(dir / "a.txt") << "alpha";
  fs::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "b.txt") << "beta";

  const std::uint64_t h1 = content_hash(dir);
  const std::uint64_t h2 = content_hash(dir);
  CHECK(h1 == h2);
  CHECK(content_hash(dir / "a.txt") == content_hash(dir / "a.txt"));
  CHECK(content_hash(dir / "a.txt") != content_hash(dir / "sub" / "b.txt"));

  std::ofstream(dir / "sub" / "b.txt") << "beta2";
  CHECK(content_hash(dir) != h1);
  fs::remove_all(dir);
}

TEST_CASE("prepared data is scaled against the training split only") {
  const fs::path root = scratch("prep");
  SynthSpec spec;
  spec.classes = 4;
  spec.reps = 5;
  spec.seed = 3;
  spec.image_side = 16;
  generate_synthetic(root, spec);
  const Dataset ds = load_dataset(root, 16);

  SplitSpec split_spec;
  split_spec.seed = 8;
  const PreparedData prep = prepare_data(ds, split_spec);
  CHECK(prep.labels == ds.labels);
  CHECK(prep.train.size() == 12);
  CHECK(prep.val.size() == 4);
  CHECK(prep.test.size() == 4);

  double lo = 1e300, hi = -1e300;
  for (const auto& in : prep.train) {
    lo = std::min(lo, in.frames.minCoeff());
    hi = std::max(hi, in.frames.maxCoeff());
  }
  CHECK(lo == 0.0);  // training extremes land exactly on the fitted range
  CHECK(hi == 1.0);

  // Held-out values may leave [0, 1]; they must still be finite.
  for (const auto& in : prep.test) {
    CHECK(in.frames.allFinite());
  }
  fs::remove_all(root);
}

TEST_CASE("ablation trains all modalities to high accuracy on a joint corpus") {
  const fs::path root = scratch("ablate");
  SynthSpec spec;
  spec.classes = 4;
  spec.reps = 6;
  spec.seed = 13;
  spec.noise = 0.02;
  spec.image_side = 16;
  generate_synthetic(root, spec);

  nlohmann::json j = minimal_config();
  j["corpus_root"] = root.string();
  j["seed"] = 2;
  j["epochs"] = 10;
  j["image_side"] = 16;
  j["augment_enabled"] = false;
  j["dropout_rate"] = 0.0;
  j["l2_lambda"] = 0.0;
  const RunConfig config = RunConfig::from_json(j);

  const AblationOutcome outcome = run_ablation(config);
  REQUIRE(outcome.rows.size() == 3);
  CHECK(outcome.rows[0].modality == Modality::leap_only);
  CHECK(outcome.rows[1].modality == Modality::image_only);
  CHECK(outcome.rows[2].modality == Modality::fusion);
  for (const AblationRow& row : outcome.rows) {
    CAPTURE(to_string(row.modality));
    CHECK(row.accuracy >= 0.95);  // every modality carries the full signal
  }

  // Shared split across the three runs.
  CHECK(outcome.runs[0].data.split.test == outcome.runs[2].data.split.test);
  fs::remove_all(root);
}

TEST_CASE("run_training wires corpus loading, split, scaling and fit") {
  const fs::path root = scratch("train");
  SynthSpec spec;
  spec.classes = 3;
  spec.reps = 4;
  spec.seed = 5;
  spec.image_side = 16;
  generate_synthetic(root, spec);

  nlohmann::json j = minimal_config();
  j["corpus_root"] = root.string();
  j["seed"] = 4;
  j["epochs"] = 2;
  j["image_side"] = 16;
  const RunConfig config = RunConfig::from_json(j);

  const TrainOutcome outcome = run_training(config);
  CHECK(outcome.history.epochs.size() == 2);
  CHECK(outcome.model.spec.classes == 3);
  CHECK(outcome.model.spec.image_side == 16);
  CHECK(outcome.data.labels.size() == 3);

  const EvaluationReport report =
      evaluate_model(outcome.model, outcome.data.test, Modality::fusion);
  CHECK(report.confusion.total() ==
        static_cast<long long>(outcome.data.test.size()));
  fs::remove_all(root);
}
