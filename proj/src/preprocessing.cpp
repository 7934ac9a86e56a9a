#include "handfuse/preprocessing.hpp"

#include <cmath>

#include "handfuse/errors.hpp"

namespace handfuse {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Bilinear sample with coordinates clamped to the image border.
double sample_clamped(const RawImage& img, double y, double x, int c) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  const double top = (1.0 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
  const double bot = (1.0 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
  return (1.0 - fy) * top + fy * bot;
}

// Bilinear sample treating everything outside the frame as 0.
double sample_zero_pad(const ImageTensor& img, double y, double x, int c) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0;
  const double fx = x - x0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int yy = y0 + dy;
      const int xx = x0 + dx;
      if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) continue;
      const double w = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
      acc += w * img.at(yy, xx, c);
    }
  }
  return acc;
}

}  // namespace

Eigen::MatrixXd impute_nan(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  impute_nan_in_place(out);
  return out;
}

void impute_nan_in_place(Eigen::MatrixXd& m) {
  double* p = m.data();
  const Eigen::Index n = m.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(p[i])) p[i] = 0.0;
  }
}

void MinMaxScaler::fit(const std::vector<Eigen::MatrixXd>& train_frames) {
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  for (const auto& m : train_frames) {
    if (cols < 0) {
      cols = m.cols();
    } else if (m.cols() != cols) {
      throw ShapeMismatch("inconsistent column counts during scaler fit");
    }
    rows += m.rows();
  }
  if (rows == 0) {
    throw EmptyInput("cannot fit a min-max scaler on zero frames");
  }
  feat_min_ = Eigen::VectorXd::Constant(cols, std::numeric_limits<double>::infinity());
  feat_max_ = Eigen::VectorXd::Constant(cols, -std::numeric_limits<double>::infinity());
  for (const auto& m : train_frames) {
    if (m.rows() == 0) continue;
    feat_min_ = feat_min_.cwiseMin(m.colwise().minCoeff().transpose());
    feat_max_ = feat_max_.cwiseMax(m.colwise().maxCoeff().transpose());
  }
  fitted_ = true;
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& frames) const {
  if (!fitted_) {
    throw NotFitted("min-max scaler used before fitting");
  }
  if (frames.cols() != feat_min_.size()) {
    throw ShapeMismatch("frame width does not match fitted scaler");
  }
  Eigen::MatrixXd out(frames.rows(), frames.cols());
  for (Eigen::Index c = 0; c < frames.cols(); ++c) {
    const double lo = feat_min_(c);
    const double range = feat_max_(c) - lo;
    if (range == 0.0) {
      out.col(c).setZero();  // constant column
    } else {
      out.col(c) = (frames.col(c).array() - lo) / range;
    }
  }
  return out;
}

nlohmann::json MinMaxScaler::to_json() const {
  if (!fitted_) {
    throw NotFitted("cannot serialize an unfitted scaler");
  }
  nlohmann::json j;
  j["min"] = std::vector<double>(feat_min_.data(), feat_min_.data() + feat_min_.size());
  j["max"] = std::vector<double>(feat_max_.data(), feat_max_.data() + feat_max_.size());
  return j;
}

MinMaxScaler MinMaxScaler::from_json(const nlohmann::json& j) {
  const auto mins = j.at("min").get<std::vector<double>>();
  const auto maxs = j.at("max").get<std::vector<double>>();
  if (mins.size() != maxs.size()) {
    throw LengthMismatch("scaler min/max arrays differ in length");
  }
  MinMaxScaler s;
  s.feat_min_ = Eigen::Map<const Eigen::VectorXd>(mins.data(), mins.size());
  s.feat_max_ = Eigen::Map<const Eigen::VectorXd>(maxs.data(), maxs.size());
  s.fitted_ = true;
  return s;
}

ImageTensor preprocess_image(const RawImage& raw, int side) {
  if (raw.height < 1 || raw.width < 1) {
    throw EmptyImage("cannot preprocess a zero-dimension image");
  }
  ImageTensor out;
  out.height = side;
  out.width = side;
  out.data.resize(static_cast<std::size_t>(side) * side * 3);
  const double sy = static_cast<double>(raw.height) / side;
  const double sx = static_cast<double>(raw.width) / side;
  for (int y = 0; y < side; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < side; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = sample_clamped(raw, src_y, src_x, c) / 255.0;
      }
    }
  }
  return out;
}

ImageTensor augment_image(const ImageTensor& img, const AugmentDraws& draws) {
  const int h = img.height;
  const int w = img.width;
  const double cy = (h - 1) / 2.0;
  const double cx = (w - 1) / 2.0;

  // Rotation about the center; out-of-frame pixels fill with 0.
  ImageTensor rotated = img;
  if (draws.rotation_deg != 0.0) {
    const double theta = draws.rotation_deg * kPi / 180.0;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dy = y - cy;
        const double dx = x - cx;
        const double src_y = cy + st * dx + ct * dy;
        const double src_x = cx + ct * dx - st * dy;
        for (int c = 0; c < 3; ++c) {
          rotated.at(y, x, c) = sample_zero_pad(img, src_y, src_x, c);
        }
      }
    }
  }

  // Center zoom.
  ImageTensor zoomed = rotated;
  if (draws.zoom != 1.0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double src_y = cy + (y - cy) / draws.zoom;
        const double src_x = cx + (x - cx) / draws.zoom;
        for (int c = 0; c < 3; ++c) {
          zoomed.at(y, x, c) = sample_zero_pad(rotated, src_y, src_x, c);
        }
      }
    }
  }

  // Contrast about mid-gray, clamped back into [0, 1].
  if (draws.contrast != 1.0) {
    for (double& v : zoomed.data) {
      v = std::clamp(0.5 + draws.contrast * (v - 0.5), 0.0, 1.0);
    }
  }
  return zoomed;
}

}  // namespace handfuse
