#include <cstring>
#include <fstream>

#include "handfuse/errors.hpp"
#include "handfuse/frame_csv.hpp"
#include "handfuse/serialization.hpp"

namespace handfuse {
namespace {

constexpr char kMagic[8] = {'H', 'F', 'C', 'K', '0', '0', '0', '1'};
constexpr int kCheckpointVersion = 1;

}  // namespace

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  return nlohmann::json{
      {"frames", spec.frames},
      {"features", spec.features},
      {"leap_units", spec.leap_units},
      {"conv_channels", spec.conv_channels},
      {"backbone_dim", spec.backbone_dim},
      {"head_units", spec.head_units},
      {"classes", spec.classes},
      {"image_side", spec.image_side},
      {"dropout_rate", spec.dropout_rate},
      {"l2_lambda", spec.l2_lambda},
  };
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.frames = j.at("frames").get<int>();
  spec.features = j.at("features").get<int>();
  spec.leap_units = j.at("leap_units").get<std::array<int, 3>>();
  spec.conv_channels = j.at("conv_channels").get<std::array<int, 3>>();
  spec.backbone_dim = j.at("backbone_dim").get<int>();
  spec.head_units = j.at("head_units").get<std::array<int, 2>>();
  spec.classes = j.at("classes").get<int>();
  spec.image_side = j.at("image_side").get<int>();
  spec.dropout_rate = j.at("dropout_rate").get<double>();
  spec.l2_lambda = j.at("l2_lambda").get<double>();
  return spec;
}

nlohmann::json train_config_to_json(const TrainConfig& config) {
  return nlohmann::json{
      {"epochs", config.epochs},
      {"learning_rate", config.learning_rate},
      {"rms_decay", config.rms_decay},
      {"rms_epsilon", config.rms_epsilon},
      {"batch_size", config.batch_size},
      {"dropout_rate", config.dropout_rate},
      {"l2_lambda", config.l2_lambda},
      {"seed", config.seed},
      {"augment",
       {{"rotation_max_deg", config.augment.rotation_max_deg},
        {"zoom_low", config.augment.zoom_low},
        {"zoom_high", config.augment.zoom_high},
        {"contrast_low", config.augment.contrast_low},
        {"contrast_high", config.augment.contrast_high}}},
      {"augment_enabled", config.augment_enabled},
      {"modality", to_string(config.modality)},
      {"freeze_backbone", config.freeze_backbone},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.rms_decay = j.at("rms_decay").get<double>();
  c.rms_epsilon = j.at("rms_epsilon").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.l2_lambda = j.at("l2_lambda").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& a = j.at("augment");
  c.augment.rotation_max_deg = a.at("rotation_max_deg").get<double>();
  c.augment.zoom_low = a.at("zoom_low").get<double>();
  c.augment.zoom_high = a.at("zoom_high").get<double>();
  c.augment.contrast_low = a.at("contrast_low").get<double>();
  c.augment.contrast_high = a.at("contrast_high").get<double>();
  c.augment_enabled = j.at("augment_enabled").get<bool>();
  c.modality = modality_from_string(j.at("modality").get<std::string>());
  c.freeze_backbone = j.at("freeze_backbone").get<bool>();
  return c;
}

void write_history_csv(const std::filesystem::path& path,
                       const TrainHistory& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    const EpochRecord& r = history.epochs[i];
    out << (i + 1) << ',' << format_value(r.train_loss) << ','
        << format_value(r.train_accuracy) << ',' << format_value(r.val_loss)
        << ',' << format_value(r.val_accuracy) << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

void save_checkpoint(const std::filesystem::path& path, const FusionModel& model,
                     const LabelTable& labels, const MinMaxScaler& scaler,
                     const TrainConfig& config) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["spec"] = model_spec_to_json(model.spec);
  header["labels"] = labels.names();
  header["scaler"] = scaler.to_json();
  header["config"] = train_config_to_json(config);
  nlohmann::json shapes = nlohmann::json::array();
  const auto views = model.params();
  for (const auto& v : views) {
    shapes.push_back({{"name", v.name},
                      {"rows", v.tensor->rows()},
                      {"cols", v.tensor->cols()}});
  }
  header["params"] = shapes;

  const std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), static_cast<std::streamsize>(len));
  for (const auto& v : views) {
    out.write(reinterpret_cast<const char*>(v.tensor->data()),
              static_cast<std::streamsize>(v.tensor->size() * sizeof(double)));
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path.string());
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) {
    throw IoError("truncated checkpoint header: " + path.string());
  }
  const nlohmann::json header = nlohmann::json::parse(header_str);
  if (header.at("version").get<int>() != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version in " + path.string());
  }

  Checkpoint ckpt;
  ckpt.model = FusionModel::zeros(model_spec_from_json(header.at("spec")));
  ckpt.labels = LabelTable(header.at("labels").get<std::vector<std::string>>());
  ckpt.scaler = MinMaxScaler::from_json(header.at("scaler"));
  ckpt.config = train_config_from_json(header.at("config"));

  auto views = ckpt.model.params();
  const auto& shapes = header.at("params");
  if (shapes.size() != views.size()) {
    throw IoError("checkpoint parameter list mismatch in " + path.string());
  }
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& s = shapes[i];
    if (s.at("name").get<std::string>() != views[i].name ||
        s.at("rows").get<Eigen::Index>() != views[i].tensor->rows() ||
        s.at("cols").get<Eigen::Index>() != views[i].tensor->cols()) {
      throw ShapeMismatch("checkpoint tensor '" +
                          s.at("name").get<std::string>() +
                          "' does not match the declared shape");
    }
    in.read(reinterpret_cast<char*>(views[i].tensor->data()),
            static_cast<std::streamsize>(views[i].tensor->size() *
                                         sizeof(double)));
  }
  if (!in) {
    throw IoError("truncated checkpoint payload: " + path.string());
  }
  return ckpt;
}

void load_backbone_weights(FusionModel& model,
                           const std::filesystem::path& path) {
  const Checkpoint source = load_checkpoint(path);
  auto dst = model.params();
  const auto src = source.model.params();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (!dst[i].backbone) continue;
    if (src[i].tensor->rows() != dst[i].tensor->rows() ||
        src[i].tensor->cols() != dst[i].tensor->cols()) {
      throw ShapeMismatch("backbone tensor '" + dst[i].name +
                          "' shape differs in " + path.string());
    }
    *dst[i].tensor = *src[i].tensor;
  }
  ++model.revision;
}

}  // namespace handfuse
