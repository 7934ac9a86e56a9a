#include "handfuse/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "handfuse/errors.hpp"

namespace handfuse {
namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

DenseLayer make_dense(int out, int in, bool relu, bool l2) {
  DenseLayer d;
  d.W = Eigen::MatrixXd::Zero(out, in);
  d.b = Eigen::MatrixXd::Zero(out, 1);
  d.relu = relu;
  d.l2 = l2;
  return d;
}

ConvLayer make_conv(int out_c, int in_c) {
  ConvLayer c;
  c.W = Eigen::MatrixXd::Zero(out_c, in_c * 9);
  c.b = Eigen::MatrixXd::Zero(out_c, 1);
  c.in_channels = in_c;
  c.out_channels = out_c;
  return c;
}

void he_uniform_fill(Eigen::MatrixXd& w, int fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / fan_in);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      w(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
  }
}

// y = x * W^T + b, optional ReLU.
Eigen::MatrixXd dense_forward(const DenseLayer& layer, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = x * layer.W.transpose();
  y.rowwise() += layer.b.col(0).transpose();
  if (layer.relu) {
    y = y.cwiseMax(0.0);
  }
  return y;
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                             std::mt19937_64& rng) {
  Eigen::MatrixXd mask(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      mask(r, c) = uniform01(rng) >= rate ? scale : 0.0;
    }
  }
  return mask;
}

// im2col for a 3x3 same-padding convolution. Input rows are y*w + x,
// patch column layout is channel * 9 + (ky+1)*3 + (kx+1).
Eigen::MatrixXd im2col(const Eigen::MatrixXd& input, int h, int w) {
  const int in_c = static_cast<int>(input.cols());
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(h * w, in_c * 9);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int row = y * w + x;
      for (int ky = -1; ky <= 1; ++ky) {
        const int sy = y + ky;
        if (sy < 0 || sy >= h) continue;
        for (int kx = -1; kx <= 1; ++kx) {
          const int sx = x + kx;
          if (sx < 0 || sx >= w) continue;
          const int src = sy * w + sx;
          const int k = (ky + 1) * 3 + (kx + 1);
          for (int c = 0; c < in_c; ++c) {
            patches(row, c * 9 + k) = input(src, c);
          }
        }
      }
    }
  }
  return patches;
}

// Reverse of im2col: scatter-adds patch gradients back onto the input.
Eigen::MatrixXd col2im(const Eigen::MatrixXd& d_patches, int h, int w, int in_c) {
  Eigen::MatrixXd d_input = Eigen::MatrixXd::Zero(h * w, in_c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int row = y * w + x;
      for (int ky = -1; ky <= 1; ++ky) {
        const int sy = y + ky;
        if (sy < 0 || sy >= h) continue;
        for (int kx = -1; kx <= 1; ++kx) {
          const int sx = x + kx;
          if (sx < 0 || sx >= w) continue;
          const int src = sy * w + sx;
          const int k = (ky + 1) * 3 + (kx + 1);
          for (int c = 0; c < in_c; ++c) {
            d_input(src, c) += d_patches(row, c * 9 + k);
          }
        }
      }
    }
  }
  return d_input;
}

// Conv + ReLU + 2x2 max-pool for one stage.
void conv_stage_forward(const ConvLayer& layer, const Eigen::MatrixXd& input,
                        int h, int w, ImageCacheStage* stage) {
  stage->h = h;
  stage->w = w;
  stage->patches = im2col(input, h, w);
  Eigen::MatrixXd act = stage->patches * layer.W.transpose();
  act.rowwise() += layer.b.col(0).transpose();
  stage->activated = act.cwiseMax(0.0);

  const int ph = h / 2;
  const int pw = w / 2;
  const int out_c = layer.out_channels;
  stage->pooled.resize(ph * pw, out_c);
  stage->argmax.assign(static_cast<std::size_t>(ph) * pw * out_c, 0);
  for (int py = 0; py < ph; ++py) {
    for (int px = 0; px < pw; ++px) {
      const int prow = py * pw + px;
      for (int c = 0; c < out_c; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        int best_row = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int row = (2 * py + dy) * w + (2 * px + dx);
            const double v = stage->activated(row, c);
            if (v > best) {
              best = v;
              best_row = row;
            }
          }
        }
        stage->pooled(prow, c) = best;
        stage->argmax[static_cast<std::size_t>(prow) * out_c + c] = best_row;
      }
    }
  }
}

// Returns the gradient with respect to the stage input; accumulates
// dW/db into the given matrices.
Eigen::MatrixXd conv_stage_backward(const ConvLayer& layer,
                                    const ImageCacheStage& stage,
                                    const Eigen::MatrixXd& d_pooled,
                                    Eigen::MatrixXd& dW, Eigen::MatrixXd& db) {
  const int out_c = layer.out_channels;
  Eigen::MatrixXd d_act =
      Eigen::MatrixXd::Zero(stage.activated.rows(), stage.activated.cols());
  for (Eigen::Index prow = 0; prow < d_pooled.rows(); ++prow) {
    for (int c = 0; c < out_c; ++c) {
      const int src = stage.argmax[static_cast<std::size_t>(prow) * out_c + c];
      d_act(src, c) += d_pooled(prow, c);
    }
  }
  // ReLU gate
  d_act = d_act.cwiseProduct(
      (stage.activated.array() > 0.0).cast<double>().matrix());

  dW += d_act.transpose() * stage.patches;
  db.col(0) += d_act.colwise().sum().transpose();
  const Eigen::MatrixXd d_patches = d_act * layer.W;
  return col2im(d_patches, stage.h, stage.w, layer.in_channels);
}

// Forward through the image backbone for one sample.
void backbone_forward(const FusionModel& model, const ImageTensor& img,
                      ImageCache* cache) {
  const int side = model.spec.image_side;
  if (img.height != side || img.width != side) {
    throw ShapeMismatch("image is " + std::to_string(img.height) + "x" +
                        std::to_string(img.width) + ", model expects " +
                        std::to_string(side) + "x" + std::to_string(side));
  }
  cache->input.resize(side * side, 3);
  for (int i = 0; i < side * side; ++i) {
    cache->input(i, 0) = img.data[static_cast<std::size_t>(i) * 3];
    cache->input(i, 1) = img.data[static_cast<std::size_t>(i) * 3 + 1];
    cache->input(i, 2) = img.data[static_cast<std::size_t>(i) * 3 + 2];
  }
  const ConvLayer* convs[3] = {&model.conv1, &model.conv2, &model.conv3};
  const Eigen::MatrixXd* input = &cache->input;
  int h = side;
  for (int s = 0; s < 3; ++s) {
    conv_stage_forward(*convs[s], *input, h, h, &cache->stages[s]);
    input = &cache->stages[s].pooled;
    h /= 2;
  }
  cache->gap = cache->stages[2].pooled.colwise().mean();
  Eigen::RowVectorXd z =
      cache->gap * model.backbone_fc.W.transpose() +
      model.backbone_fc.b.col(0).transpose();
  cache->features = z.cwiseMax(0.0);
}

struct ParamIndex {
  // Offsets into the params() order, fixed by construction.
  enum : int {
    leap1_W, leap1_b, leap2_W, leap2_b, leap3_W, leap3_b,
    conv1_W, conv1_b, conv2_W, conv2_b, conv3_W, conv3_b,
    backbone_fc_W, backbone_fc_b,
    head1_W, head1_b, head2_W, head2_b, out_W, out_b,
    count
  };
};

}  // namespace

Modality modality_from_string(const std::string& s) {
  if (s == "fusion") return Modality::fusion;
  if (s == "leap_only") return Modality::leap_only;
  if (s == "image_only") return Modality::image_only;
  throw ConfigError("unknown modality '" + s + "'");
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::fusion: return "fusion";
    case Modality::leap_only: return "leap_only";
    case Modality::image_only: return "image_only";
  }
  return "fusion";
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

double cross_entropy(const Eigen::VectorXd& probs, int target) {
  if (target < 0 || target >= probs.size()) {
    throw IndexOutOfRange("cross-entropy target out of range");
  }
  return -std::log(std::max(probs(target), 1e-12));
}

Eigen::VectorXd dropout_forward(const Eigen::VectorXd& x, double rate,
                                RunMode mode, const std::vector<bool>& keep) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  if (mode == RunMode::infer || rate == 0.0) {
    return x;
  }
  if (static_cast<Eigen::Index>(keep.size()) != x.size()) {
    throw LengthMismatch("dropout mask length does not match input");
  }
  Eigen::VectorXd y(x.size());
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y(i) = keep[i] ? x(i) * scale : 0.0;
  }
  return y;
}

void rmsprop_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                  Eigen::MatrixXd& state, double lr, double rho, double eps) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols() ||
      param.rows() != state.rows() || param.cols() != state.cols()) {
    throw ShapeMismatch("rmsprop shapes disagree");
  }
  state = rho * state + (1.0 - rho) * grad.cwiseProduct(grad);
  param.array() -= lr * grad.array() / (state.array().sqrt() + eps);
}

FusionModel FusionModel::zeros(const ModelSpec& spec) {
  if (spec.image_side % 8 != 0) {
    throw ShapeMismatch("image side must be divisible by 8");
  }
  FusionModel m;
  m.spec = spec;
  m.leap1 = make_dense(spec.leap_units[0], spec.features, true, true);
  m.leap2 = make_dense(spec.leap_units[1], spec.leap_units[0], true, true);
  m.leap3 = make_dense(spec.leap_units[2], spec.leap_units[1], true, true);
  m.conv1 = make_conv(spec.conv_channels[0], 3);
  m.conv2 = make_conv(spec.conv_channels[1], spec.conv_channels[0]);
  m.conv3 = make_conv(spec.conv_channels[2], spec.conv_channels[1]);
  m.backbone_fc = make_dense(spec.backbone_dim, spec.conv_channels[2], true, false);
  m.head1 = make_dense(spec.head_units[0], m.spec.concat_dim(), true, false);
  m.head2 = make_dense(spec.head_units[1], spec.head_units[0], true, false);
  m.out = make_dense(spec.classes, spec.head_units[1], false, false);
  m.out.relu = false;
  return m;
}

FusionModel FusionModel::init(const ModelSpec& spec, std::uint64_t seed) {
  FusionModel m = zeros(spec);
  std::mt19937_64 rng(mix64(seed ^ 0x1f2e3d4c5b6a7988ULL));
  he_uniform_fill(m.leap1.W, spec.features, rng);
  he_uniform_fill(m.leap2.W, spec.leap_units[0], rng);
  he_uniform_fill(m.leap3.W, spec.leap_units[1], rng);
  he_uniform_fill(m.conv1.W, 3 * 9, rng);
  he_uniform_fill(m.conv2.W, spec.conv_channels[0] * 9, rng);
  he_uniform_fill(m.conv3.W, spec.conv_channels[1] * 9, rng);
  he_uniform_fill(m.backbone_fc.W, spec.conv_channels[2], rng);
  he_uniform_fill(m.head1.W, m.spec.concat_dim(), rng);
  he_uniform_fill(m.head2.W, spec.head_units[0], rng);
  he_uniform_fill(m.out.W, spec.head_units[1], rng);
  return m;
}

std::vector<ParamView> FusionModel::params() {
  return {
      {"leap1.W", &leap1.W, true, false},  {"leap1.b", &leap1.b, false, false},
      {"leap2.W", &leap2.W, true, false},  {"leap2.b", &leap2.b, false, false},
      {"leap3.W", &leap3.W, true, false},  {"leap3.b", &leap3.b, false, false},
      {"conv1.W", &conv1.W, false, true},  {"conv1.b", &conv1.b, false, true},
      {"conv2.W", &conv2.W, false, true},  {"conv2.b", &conv2.b, false, true},
      {"conv3.W", &conv3.W, false, true},  {"conv3.b", &conv3.b, false, true},
      {"backbone_fc.W", &backbone_fc.W, false, true},
      {"backbone_fc.b", &backbone_fc.b, false, true},
      {"head1.W", &head1.W, false, false}, {"head1.b", &head1.b, false, false},
      {"head2.W", &head2.W, false, false}, {"head2.b", &head2.b, false, false},
      {"out.W", &out.W, false, false},     {"out.b", &out.b, false, false},
  };
}

std::vector<ParamView> FusionModel::params() const {
  // Read-only callers; the tensors are never written through this view.
  return const_cast<FusionModel*>(this)->params();
}

double l2_penalty(const FusionModel& model) {
  if (model.spec.l2_lambda == 0.0) return 0.0;
  double sum = 0.0;
  sum += model.leap1.W.squaredNorm();
  sum += model.leap2.W.squaredNorm();
  sum += model.leap3.W.squaredNorm();
  return model.spec.l2_lambda * sum;
}

ForwardCache forward_batch(const FusionModel& model,
                           const std::vector<const ModelInput*>& batch,
                           RunMode mode, Modality modality,
                           std::mt19937_64* dropout_rng) {
  const ModelSpec& spec = model.spec;
  const int n = static_cast<int>(batch.size());
  if (n == 0) {
    throw EmptyInput("empty forward batch");
  }
  const double rate = spec.dropout_rate;
  const bool use_dropout = mode == RunMode::train && rate > 0.0;
  if (use_dropout && dropout_rng == nullptr) {
    throw ConfigError("train-mode forward with dropout needs an RNG");
  }

  ForwardCache cache;
  cache.revision = model.revision;
  cache.mode = mode;
  cache.modality = modality;
  cache.batch = n;
  cache.concat = Eigen::MatrixXd::Zero(n, spec.concat_dim());

  if (modality != Modality::image_only) {
    cache.leap_in.resize(static_cast<Eigen::Index>(n) * spec.frames,
                         spec.features);
    for (int i = 0; i < n; ++i) {
      const Eigen::MatrixXd& frames = batch[i]->frames;
      if (frames.rows() != spec.frames || frames.cols() != spec.features) {
        throw ShapeMismatch("leap frames are " + std::to_string(frames.rows()) +
                            "x" + std::to_string(frames.cols()) +
                            ", model expects " + std::to_string(spec.frames) +
                            "x" + std::to_string(spec.features));
      }
      cache.leap_in.middleRows(static_cast<Eigen::Index>(i) * spec.frames,
                               spec.frames) = frames;
    }
    cache.a1 = dense_forward(model.leap1, cache.leap_in);
    cache.m1 = use_dropout
                   ? dropout_mask(cache.a1.rows(), cache.a1.cols(), rate,
                                  *dropout_rng)
                   : Eigen::MatrixXd::Ones(cache.a1.rows(), cache.a1.cols());
    cache.a2 = dense_forward(model.leap2, cache.a1.cwiseProduct(cache.m1));
    cache.m2 = use_dropout
                   ? dropout_mask(cache.a2.rows(), cache.a2.cols(), rate,
                                  *dropout_rng)
                   : Eigen::MatrixXd::Ones(cache.a2.rows(), cache.a2.cols());
    cache.a3 = dense_forward(model.leap3, cache.a2.cwiseProduct(cache.m2));
    // Flatten the temporal axis: sample i's block of frames x units rows
    // becomes one row of frames*units values, frame-major.
    const int u3 = spec.leap_units[2];
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < spec.frames; ++t) {
        cache.concat.block(i, static_cast<Eigen::Index>(t) * u3, 1, u3) =
            cache.a3.row(static_cast<Eigen::Index>(i) * spec.frames + t);
      }
    }
  }

  if (modality != Modality::leap_only) {
    cache.images.resize(n);
    for (int i = 0; i < n; ++i) {
      backbone_forward(model, batch[i]->image, &cache.images[i]);
      cache.concat.block(i, spec.leap_flat_dim(), 1, spec.backbone_dim) =
          cache.images[i].features;
    }
  }

  cache.h1 = dense_forward(model.head1, cache.concat);
  cache.hm1 = use_dropout
                  ? dropout_mask(cache.h1.rows(), cache.h1.cols(), rate,
                                 *dropout_rng)
                  : Eigen::MatrixXd::Ones(cache.h1.rows(), cache.h1.cols());
  cache.h2 = dense_forward(model.head2, cache.h1.cwiseProduct(cache.hm1));
  cache.hm2 = use_dropout
                  ? dropout_mask(cache.h2.rows(), cache.h2.cols(), rate,
                                 *dropout_rng)
                  : Eigen::MatrixXd::Ones(cache.h2.rows(), cache.h2.cols());
  Eigen::MatrixXd logits = dense_forward(model.out, cache.h2.cwiseProduct(cache.hm2));

  cache.probs.resize(n, spec.classes);
  for (int i = 0; i < n; ++i) {
    cache.probs.row(i) = softmax(logits.row(i).transpose()).transpose();
  }
  return cache;
}

Eigen::VectorXd forward_probs(const FusionModel& model, const ModelInput& input,
                              Modality modality) {
  const std::vector<const ModelInput*> batch{&input};
  return forward_batch(model, batch, RunMode::infer, modality)
      .probs.row(0)
      .transpose();
}

Gradients backward_batch(const FusionModel& model, const ForwardCache& cache,
                         const std::vector<int>& targets) {
  if (cache.revision != model.revision) {
    throw StaleCache("forward cache is stale: model parameters changed");
  }
  if (static_cast<int>(targets.size()) != cache.batch) {
    throw LengthMismatch("target count does not match batch size");
  }
  const ModelSpec& spec = model.spec;
  const int n = cache.batch;

  Gradients grads(ParamIndex::count);
  {
    const auto views = model.params();
    for (int i = 0; i < ParamIndex::count; ++i) {
      grads[i] = Eigen::MatrixXd::Zero(views[i].tensor->rows(),
                                       views[i].tensor->cols());
    }
  }

  // Softmax + cross-entropy: dlogits = (probs - onehot) / n.
  Eigen::MatrixXd dlogits = cache.probs;
  for (int i = 0; i < n; ++i) {
    if (targets[i] < 0 || targets[i] >= spec.classes) {
      throw IndexOutOfRange("target class out of range");
    }
    dlogits(i, targets[i]) -= 1.0;
  }
  dlogits /= static_cast<double>(n);

  const Eigen::MatrixXd h2d = cache.h2.cwiseProduct(cache.hm2);
  const Eigen::MatrixXd h1d = cache.h1.cwiseProduct(cache.hm1);

  grads[ParamIndex::out_W] = dlogits.transpose() * h2d;
  grads[ParamIndex::out_b].col(0) = dlogits.colwise().sum().transpose();

  Eigen::MatrixXd dh2 = (dlogits * model.out.W).cwiseProduct(cache.hm2);
  dh2 = dh2.cwiseProduct((cache.h2.array() > 0.0).cast<double>().matrix());
  grads[ParamIndex::head2_W] = dh2.transpose() * h1d;
  grads[ParamIndex::head2_b].col(0) = dh2.colwise().sum().transpose();

  Eigen::MatrixXd dh1 = (dh2 * model.head2.W).cwiseProduct(cache.hm1);
  dh1 = dh1.cwiseProduct((cache.h1.array() > 0.0).cast<double>().matrix());
  grads[ParamIndex::head1_W] = dh1.transpose() * cache.concat;
  grads[ParamIndex::head1_b].col(0) = dh1.colwise().sum().transpose();

  const Eigen::MatrixXd dconcat = dh1 * model.head1.W;

  if (cache.modality != Modality::image_only) {
    // Un-flatten the temporal axis back to (n*frames) x units.
    const int u3 = spec.leap_units[2];
    Eigen::MatrixXd da3(static_cast<Eigen::Index>(n) * spec.frames, u3);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < spec.frames; ++t) {
        da3.row(static_cast<Eigen::Index>(i) * spec.frames + t) =
            dconcat.block(i, static_cast<Eigen::Index>(t) * u3, 1, u3);
      }
    }
    da3 = da3.cwiseProduct((cache.a3.array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd d2 = cache.a2.cwiseProduct(cache.m2);
    const Eigen::MatrixXd d1 = cache.a1.cwiseProduct(cache.m1);
    grads[ParamIndex::leap3_W] = da3.transpose() * d2;
    grads[ParamIndex::leap3_b].col(0) = da3.colwise().sum().transpose();

    Eigen::MatrixXd da2 = (da3 * model.leap3.W).cwiseProduct(cache.m2);
    da2 = da2.cwiseProduct((cache.a2.array() > 0.0).cast<double>().matrix());
    grads[ParamIndex::leap2_W] = da2.transpose() * d1;
    grads[ParamIndex::leap2_b].col(0) = da2.colwise().sum().transpose();

    Eigen::MatrixXd da1 = (da2 * model.leap2.W).cwiseProduct(cache.m1);
    da1 = da1.cwiseProduct((cache.a1.array() > 0.0).cast<double>().matrix());
    grads[ParamIndex::leap1_W] = da1.transpose() * cache.leap_in;
    grads[ParamIndex::leap1_b].col(0) = da1.colwise().sum().transpose();
  }

  if (cache.modality != Modality::leap_only) {
    const ConvLayer* convs[3] = {&model.conv1, &model.conv2, &model.conv3};
    const int conv_w[3] = {ParamIndex::conv1_W, ParamIndex::conv2_W,
                           ParamIndex::conv3_W};
    const int conv_b[3] = {ParamIndex::conv1_b, ParamIndex::conv2_b,
                           ParamIndex::conv3_b};
    for (int i = 0; i < n; ++i) {
      const ImageCache& img = cache.images[i];
      Eigen::RowVectorXd dfeat =
          dconcat.block(i, spec.leap_flat_dim(), 1, spec.backbone_dim);
      Eigen::RowVectorXd dz = dfeat.cwiseProduct(
          (img.features.array() > 0.0).cast<double>().matrix());
      grads[ParamIndex::backbone_fc_W] += dz.transpose() * img.gap;
      grads[ParamIndex::backbone_fc_b].col(0) += dz.transpose();

      Eigen::RowVectorXd dgap = dz * model.backbone_fc.W;
      const Eigen::Index gap_rows = img.stages[2].pooled.rows();
      Eigen::MatrixXd d_pooled =
          (Eigen::VectorXd::Ones(gap_rows) / static_cast<double>(gap_rows)) *
          dgap;
      for (int s = 2; s >= 0; --s) {
        d_pooled = conv_stage_backward(*convs[s], img.stages[s], d_pooled,
                                       grads[conv_w[s]], grads[conv_b[s]]);
      }
    }
  }

  // L2 contribution: 2 * lambda * w on regularized weights.
  if (spec.l2_lambda != 0.0) {
    grads[ParamIndex::leap1_W] += 2.0 * spec.l2_lambda * model.leap1.W;
    grads[ParamIndex::leap2_W] += 2.0 * spec.l2_lambda * model.leap2.W;
    grads[ParamIndex::leap3_W] += 2.0 * spec.l2_lambda * model.leap3.W;
  }
  return grads;
}

int predict(const FusionModel& model, const ModelInput& input,
            Modality modality) {
  const Eigen::VectorXd probs = forward_probs(model, input, modality);
  int best = 0;
  for (int i = 1; i < probs.size(); ++i) {
    if (probs(i) > probs(best)) best = i;
  }
  return best;
}

std::pair<double, double> evaluate_loss_accuracy(
    const FusionModel& model, const std::vector<ModelInput>& samples,
    Modality modality) {
  if (samples.empty()) {
    throw EmptyInput("cannot evaluate on an empty sample set");
  }
  double ce_sum = 0.0;
  int correct = 0;
  const int chunk = 32;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    std::vector<const ModelInput*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    const ForwardCache cache =
        forward_batch(model, batch, RunMode::infer, modality);
    for (std::size_t i = start; i < end; ++i) {
      const Eigen::VectorXd p =
          cache.probs.row(static_cast<Eigen::Index>(i - start)).transpose();
      ce_sum += cross_entropy(p, samples[i].label);
      int best = 0;
      for (int k = 1; k < p.size(); ++k) {
        if (p(k) > p(best)) best = k;
      }
      if (best == samples[i].label) ++correct;
    }
  }
  const double loss = ce_sum / samples.size() + l2_penalty(model);
  const double acc = static_cast<double>(correct) / samples.size();
  return {loss, acc};
}

TrainHistory fit(FusionModel& model, const std::vector<ModelInput>& train,
                 const std::vector<ModelInput>& val, const TrainConfig& config) {
  if (train.empty() || val.empty()) {
    throw EmptyInput("fit needs nonempty train and val sets");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw ConfigError("epochs and batch_size must be >= 1");
  }
  if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  model.spec.dropout_rate = config.dropout_rate;
  model.spec.l2_lambda = config.l2_lambda;

  std::mt19937_64 shuffle_rng(mix64(config.seed ^ 0x51e8f00dULL));
  std::mt19937_64 dropout_rng(mix64(config.seed ^ 0xd20b0075ULL));
  std::mt19937_64 augment_rng(mix64(config.seed ^ 0xa06e37edULL));

  auto views = model.params();
  std::vector<Eigen::MatrixXd> opt_state;
  opt_state.reserve(views.size());
  for (const auto& v : views) {
    opt_state.push_back(Eigen::MatrixXd::Zero(v.tensor->rows(), v.tensor->cols()));
  }

  const bool augment_images =
      config.augment_enabled && config.modality != Modality::leap_only;

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainHistory history;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<ModelInput> augmented;  // owns augmented image copies
      std::vector<const ModelInput*> batch;
      std::vector<int> targets;
      augmented.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const ModelInput& src = train[order[i]];
        targets.push_back(src.label);
        if (augment_images) {
          AugmentDraws draws;
          draws.rotation_deg = (2.0 * uniform01(augment_rng) - 1.0) *
                               config.augment.rotation_max_deg;
          draws.zoom = config.augment.zoom_low +
                       uniform01(augment_rng) *
                           (config.augment.zoom_high - config.augment.zoom_low);
          draws.contrast =
              config.augment.contrast_low +
              uniform01(augment_rng) *
                  (config.augment.contrast_high - config.augment.contrast_low);
          ModelInput copy;
          copy.frames = src.frames;
          copy.image = augment_image(src.image, draws);
          copy.label = src.label;
          augmented.push_back(std::move(copy));
          batch.push_back(&augmented.back());
        } else {
          batch.push_back(&src);
        }
      }

      const ForwardCache cache = forward_batch(model, batch, RunMode::train,
                                               config.modality, &dropout_rng);
      double batch_ce = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        batch_ce += cross_entropy(
            cache.probs.row(static_cast<Eigen::Index>(i)).transpose(),
            targets[i]);
      }
      const double batch_loss = batch_ce / batch.size() + l2_penalty(model);
      if (!std::isfinite(batch_loss)) {
        throw NonFiniteLoss("non-finite loss at epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(start / config.batch_size));
      }

      const Gradients grads = backward_batch(model, cache, targets);
      for (std::size_t p = 0; p < views.size(); ++p) {
        if (config.freeze_backbone && views[p].backbone) continue;
        rmsprop_step(*views[p].tensor, grads[p], opt_state[p],
                     config.learning_rate, config.rms_decay, config.rms_epsilon);
      }
      ++model.revision;
    }

    EpochRecord rec;
    std::tie(rec.train_loss, rec.train_accuracy) =
        evaluate_loss_accuracy(model, train, config.modality);
    std::tie(rec.val_loss, rec.val_accuracy) =
        evaluate_loss_accuracy(model, val, config.modality);
    history.epochs.push_back(rec);
  }
  return history;
}

}  // namespace handfuse
