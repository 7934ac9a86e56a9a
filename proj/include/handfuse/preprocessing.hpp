#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include <json.hpp>

namespace handfuse {

/// Replaces every NaN with 0, leaving finite values and the shape
/// untouched. Idempotent.
Eigen::MatrixXd impute_nan(const Eigen::MatrixXd& m);
void impute_nan_in_place(Eigen::MatrixXd& m);

/// Per-feature min-max scaler: v -> (v - min) / (max - min), fit on the
/// training split only. Constant columns map to 0.
class MinMaxScaler {
 public:
  /// Fits column-wise extrema over every row of every given matrix.
  /// Inputs must already be imputed. Throws EmptyInput when no rows are
  /// given, ShapeMismatch on inconsistent column counts.
  void fit(const std::vector<Eigen::MatrixXd>& train_frames);

  /// Scales one row-matrix of frames. Outputs are NOT clamped: values
  /// outside the fitted range scale past [0, 1]. Throws NotFitted.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& frames) const;

  bool fitted() const { return fitted_; }
  const Eigen::VectorXd& feat_min() const { return feat_min_; }
  const Eigen::VectorXd& feat_max() const { return feat_max_; }

  nlohmann::json to_json() const;
  static MinMaxScaler from_json(const nlohmann::json& j);

 private:
  Eigen::VectorXd feat_min_;
  Eigen::VectorXd feat_max_;
  bool fitted_ = false;
};

/// 8-bit RGB image, row-major, channel-last.
struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // height * width * 3

  std::uint8_t& at(int y, int x, int c) { return data[(y * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const { return data[(y * width + x) * 3 + c]; }
};

/// Floating-point RGB image with values in [0, 1], row-major,
/// channel-last.
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // height * width * 3

  double& at(int y, int x, int c) { return data[(y * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(y * width + x) * 3 + c]; }
};

struct AugmentParams {
  double rotation_max_deg = 15.0;
  double zoom_low = 0.9;
  double zoom_high = 1.1;
  double contrast_low = 0.8;
  double contrast_high = 1.2;
};

/// The three uniform draws consumed by one augmentation: a rotation
/// angle in degrees, a zoom factor, and a contrast factor.
struct AugmentDraws {
  double rotation_deg = 0.0;
  double zoom = 1.0;
  double contrast = 1.0;
};

/// Bilinear resize to side x side, then scale bytes by 1/255.
/// Throws EmptyImage on zero-dimension input.
ImageTensor preprocess_image(const RawImage& raw, int side = 224);

/// Rotation about the center (out-of-frame pixels fill with 0), center
/// zoom, then contrast v' = clamp(0.5 + c*(v - 0.5), 0, 1). Identity
/// draws reproduce the input exactly.
ImageTensor augment_image(const ImageTensor& img, const AugmentDraws& draws);

}  // namespace handfuse
