#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "handfuse/dataset.hpp"
#include "handfuse/frame.hpp"
#include "handfuse/preprocessing.hpp"

namespace handfuse {

enum class Modality { fusion, leap_only, image_only };
enum class RunMode { train, infer };

Modality modality_from_string(const std::string& s);
std::string to_string(Modality m);

/// Numerically stable softmax (max-subtraction).
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// -ln(probs[target]) with the probability floored at 1e-12.
double cross_entropy(const Eigen::VectorXd& probs, int target);

/// Inverted dropout on one vector given an explicit keep mask; infer
/// mode is the identity.
Eigen::VectorXd dropout_forward(const Eigen::VectorXd& x, double rate,
                                RunMode mode, const std::vector<bool>& keep);

/// One RMSprop update: v' = rho*v + (1-rho)*g^2,
/// p' = p - lr * g / (sqrt(v') + eps). Shapes must agree.
void rmsprop_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                  Eigen::MatrixXd& state, double lr, double rho, double eps);

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::MatrixXd b;  // out x 1
  bool relu = true;
  bool l2 = false;
};

/// 3x3 same-padding convolution stored im2col-style: W is
/// out_channels x (in_channels * 9).
struct ConvLayer {
  Eigen::MatrixXd W;
  Eigen::MatrixXd b;  // out_channels x 1
  int in_channels = 0;
  int out_channels = 0;
};

/// Architecture hyperparameters. Defaults follow the full-size model;
/// tests shrink everything for gradient checks.
struct ModelSpec {
  int frames = kFramesPerRepetition;
  int features = kFrameValues;
  std::array<int, 3> leap_units = {512, 256, 128};
  std::array<int, 3> conv_channels = {8, 16, 32};
  int backbone_dim = 128;
  std::array<int, 2> head_units = {256, 128};
  int classes = 18;
  int image_side = 224;  // must be divisible by 8 (three 2x2 pools)
  double dropout_rate = 0.2;
  double l2_lambda = 0.01;

  int leap_flat_dim() const { return frames * leap_units[2]; }
  int concat_dim() const { return leap_flat_dim() + backbone_dim; }
  bool operator==(const ModelSpec&) const = default;
};

/// A mutable view of one parameter tensor, used by the optimizer, the
/// L2 scan, serialization, and finite-difference probing.
struct ParamView {
  std::string name;
  Eigen::MatrixXd* tensor;
  bool regularized;  // participates in the L2 penalty
  bool backbone;     // belongs to the image backbone
};

/// Per-frame dense stack over the leap frames, a small convolutional
/// image backbone, and the late-fusion classification head.
struct FusionModel {
  ModelSpec spec;
  DenseLayer leap1, leap2, leap3;
  ConvLayer conv1, conv2, conv3;
  DenseLayer backbone_fc;
  DenseLayer head1, head2, out;
  std::uint64_t revision = 0;

  /// He-uniform weights, zero biases, seeded.
  static FusionModel init(const ModelSpec& spec, std::uint64_t seed);
  /// All-zero parameters (uniform softmax output).
  static FusionModel zeros(const ModelSpec& spec);

  std::vector<ParamView> params();
  std::vector<ParamView> params() const;  // views into const storage
};

/// lambda * sum of squared weights over the L2-regularized layers.
double l2_penalty(const FusionModel& model);

/// Gradients aligned with FusionModel::params() order.
using Gradients = std::vector<Eigen::MatrixXd>;

struct ImageCacheStage {
  Eigen::MatrixXd patches;    // (h*w) x (in_c*9)
  Eigen::MatrixXd activated;  // (h*w) x out_c, post-ReLU
  Eigen::MatrixXd pooled;     // (h/2*w/2) x out_c
  std::vector<int> argmax;    // pool source row per pooled entry/channel
  int h = 0, w = 0;
};

struct ImageCache {
  Eigen::MatrixXd input;  // (side*side) x 3
  std::array<ImageCacheStage, 3> stages;
  Eigen::RowVectorXd gap;       // 1 x c3
  Eigen::RowVectorXd features;  // 1 x backbone_dim, post-activation
};

/// Everything backward needs from one batched forward pass.
struct ForwardCache {
  std::uint64_t revision = 0;
  RunMode mode = RunMode::infer;
  Modality modality = Modality::fusion;
  int batch = 0;
  Eigen::MatrixXd leap_in;            // (batch*frames) x features
  Eigen::MatrixXd a1, a2, a3;         // post-ReLU leap activations
  Eigen::MatrixXd m1, m2;             // dropout masks (0 or 1/keep)
  std::vector<ImageCache> images;
  Eigen::MatrixXd concat;             // batch x concat_dim
  Eigen::MatrixXd h1, h2;             // post-ReLU head activations
  Eigen::MatrixXd hm1, hm2;           // head dropout masks
  Eigen::MatrixXd probs;              // batch x classes
};

/// One preprocessed training/evaluation sample: scaled frames and a
/// [0, 1] image tensor.
struct ModelInput {
  Eigen::MatrixXd frames;  // frames x features
  ImageTensor image;
  int label = -1;
};

/// Batched forward pass. In leap_only / image_only modes the absent
/// branch contributes a zero block of identical width to the
/// concatenation (and is skipped entirely). dropout_rng is required in
/// train mode when dropout_rate > 0.
ForwardCache forward_batch(const FusionModel& model,
                           const std::vector<const ModelInput*>& batch,
                           RunMode mode, Modality modality,
                           std::mt19937_64* dropout_rng = nullptr);

/// Single-sample convenience wrapper; returns class probabilities.
Eigen::VectorXd forward_probs(const FusionModel& model, const ModelInput& input,
                              Modality modality = Modality::fusion);

/// Gradients of mean cross-entropy over the batch plus the L2 penalty,
/// with respect to every parameter. Dropout masks from the cached
/// forward pass are reused. Throws StaleCache if the model changed
/// since the forward pass.
Gradients backward_batch(const FusionModel& model, const ForwardCache& cache,
                         const std::vector<int>& targets);

/// Argmax prediction, ties broken toward the lowest index.
int predict(const FusionModel& model, const ModelInput& input,
            Modality modality = Modality::fusion);

struct EpochRecord {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainConfig {
  int epochs = 75;
  double learning_rate = 1e-3;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-7;
  int batch_size = 8;
  double dropout_rate = 0.2;
  double l2_lambda = 0.01;
  std::uint64_t seed = 0;
  AugmentParams augment;
  bool augment_enabled = true;
  Modality modality = Modality::fusion;
  bool freeze_backbone = false;
};

/// Mean cross-entropy + L2 penalty and accuracy over a sample set,
/// dropout-free, no augmentation.
std::pair<double, double> evaluate_loss_accuracy(
    const FusionModel& model, const std::vector<ModelInput>& samples,
    Modality modality);

/// Seeded mini-batch training: per epoch the train set is shuffled,
/// training images are augmented on the fly, mean batch gradients are
/// applied through RMSprop, and metrics are recorded on un-augmented
/// data. Returns the final-epoch model state in place. Throws
/// NonFiniteLoss (with epoch and batch index) if the loss leaves the
/// finite range.
TrainHistory fit(FusionModel& model, const std::vector<ModelInput>& train,
                 const std::vector<ModelInput>& val, const TrainConfig& config);

/// Writes history as CSV: epoch,train_loss,train_acc,val_loss,val_acc.
void write_history_csv(const std::filesystem::path& path,
                       const TrainHistory& history);

/// Self-describing checkpoint: a JSON header (version, shapes, label
/// table, scaler, train config) followed by raw little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, const FusionModel& model,
                     const LabelTable& labels, const MinMaxScaler& scaler,
                     const TrainConfig& config);

struct Checkpoint {
  FusionModel model;
  LabelTable labels;
  MinMaxScaler scaler;
  TrainConfig config;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies the backbone tensors (conv stack + backbone dense layer) from
/// another checkpoint into `model`. Shapes must match.
void load_backbone_weights(FusionModel& model, const std::filesystem::path& path);

}  // namespace handfuse
