#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <unistd.h>

#include "handfuse/errors.hpp"
#include "handfuse/image_io.hpp"
#include "handfuse/preprocessing.hpp"

using namespace handfuse;
namespace fs = std::filesystem;

TEST_CASE("nan imputation zeroes NaN only and is idempotent") {
  Eigen::MatrixXd m(2, 3);
  m << 1.0, std::nan(""), -3.5, 0.0, 7.0, std::nan("");
  const Eigen::MatrixXd once = impute_nan(m);
  CHECK(once(0, 0) == 1.0);
  CHECK(once(0, 1) == 0.0);
  CHECK(once(0, 2) == -3.5);
  CHECK(once(1, 2) == 0.0);
  CHECK((impute_nan(once).array() == once.array()).all());
}

TEST_CASE("scaler maps training data into [0,1] with extremes attained") {
  // Property check over many random "corpora": random shapes, random
  // values, some columns forced constant, some containing NaN before
  // imputation.
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> n_mats(1, 5);
  std::uniform_int_distribution<int> n_rows(1, 20);
  std::uniform_int_distribution<int> n_cols(1, 12);
  std::uniform_real_distribution<double> val(-50.0, 50.0);

  for (int trial = 0; trial < 200; ++trial) {
    const int cols = n_cols(rng);
    const int mats = n_mats(rng);
    std::vector<Eigen::MatrixXd> train;
    for (int m = 0; m < mats; ++m) {
      Eigen::MatrixXd t(n_rows(rng), cols);
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (int c = 0; c < cols; ++c) t(r, c) = val(rng);
      }
      train.push_back(t);
    }
    const int const_col = trial % cols;
    for (auto& t : train) t.col(const_col).setConstant(3.25);

    MinMaxScaler scaler;
    scaler.fit(train);
    // A column can also end up constant by chance (e.g. one total row).
    std::vector<bool> constant(cols);
    for (int c = 0; c < cols; ++c) {
      constant[c] = scaler.feat_min()(c) == scaler.feat_max()(c);
    }
    CHECK(constant[const_col]);

    std::vector<double> col_min(cols, 1e300), col_max(cols, -1e300);
    for (const auto& t : train) {
      const Eigen::MatrixXd scaled = scaler.transform(t);
      for (Eigen::Index r = 0; r < scaled.rows(); ++r) {
        for (int c = 0; c < cols; ++c) {
          CHECK(scaled(r, c) >= 0.0);
          CHECK(scaled(r, c) <= 1.0);
          col_min[c] = std::min(col_min[c], scaled(r, c));
          col_max[c] = std::max(col_max[c], scaled(r, c));
        }
      }
    }
    for (int c = 0; c < cols; ++c) {
      CHECK(col_min[c] == 0.0);
      CHECK(col_max[c] == (constant[c] ? 0.0 : 1.0));
    }
  }
}

TEST_CASE("scaler does not clamp out-of-range values at transform time") {
  MinMaxScaler scaler;
  scaler.fit({(Eigen::MatrixXd(2, 1) << 0.0, 10.0).finished()});
  Eigen::MatrixXd probe(2, 1);
  probe << -5.0, 20.0;
  const Eigen::MatrixXd scaled = scaler.transform(probe);
  CHECK(scaled(0, 0) == -0.5);
  CHECK(scaled(1, 0) == 2.0);
}

TEST_CASE("scaler error paths") {
  MinMaxScaler scaler;
  CHECK_THROWS_AS(scaler.transform(Eigen::MatrixXd::Zero(1, 1)), NotFitted);
  CHECK_THROWS_AS(scaler.to_json(), NotFitted);
  CHECK_THROWS_AS(scaler.fit({}), EmptyInput);
  CHECK_THROWS_AS(scaler.fit({Eigen::MatrixXd::Zero(1, 2),
                              Eigen::MatrixXd::Zero(1, 3)}),
                  ShapeMismatch);
  scaler.fit({Eigen::MatrixXd::Zero(1, 2)});
  CHECK_THROWS_AS(scaler.transform(Eigen::MatrixXd::Zero(1, 3)), ShapeMismatch);
}

TEST_CASE("scaler json round-trip") {
  MinMaxScaler scaler;
  scaler.fit({(Eigen::MatrixXd(2, 2) << -1.0, 4.0, 3.0, 8.0).finished()});
  const nlohmann::json j = scaler.to_json();
  CHECK(j.size() == 2);
  CHECK(j.at("min") == nlohmann::json({-1.0, 4.0}));
  CHECK(j.at("max") == nlohmann::json({3.0, 8.0}));
  const MinMaxScaler back = MinMaxScaler::from_json(j);
  Eigen::MatrixXd probe(1, 2);
  probe << 1.0, 6.0;
  CHECK((back.transform(probe).array() == scaler.transform(probe).array()).all());
}

TEST_CASE("preprocess scales bytes by 1/255 and keeps constant images flat") {
  RawImage raw;
  raw.height = 10;
  raw.width = 6;
  raw.data.assign(10 * 6 * 3, 51);
  const ImageTensor t = preprocess_image(raw, 8);
  CHECK(t.height == 8);
  CHECK(t.width == 8);
  for (double v : t.data) CHECK(v == doctest::Approx(51.0 / 255.0));
}

TEST_CASE("upsampling keeps the corner pixels exact") {
  RawImage raw;
  raw.height = 2;
  raw.width = 2;
  raw.data.assign(2 * 2 * 3, 0);
  raw.at(0, 0, 0) = 255;
  raw.at(1, 1, 0) = 255;
  const ImageTensor t = preprocess_image(raw, 8);
  // With half-pixel mapping and border clamping the extreme output
  // pixels sample inside the source corner pixels exactly.
  CHECK(t.at(0, 0, 0) == doctest::Approx(1.0));
  CHECK(t.at(7, 7, 0) == doctest::Approx(1.0));
  CHECK(t.at(0, 7, 0) == doctest::Approx(0.0));
  CHECK(t.at(7, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("preprocess rejects empty images") {
  CHECK_THROWS_AS(preprocess_image(RawImage{}, 8), EmptyImage);
}

TEST_CASE("identity augmentation reproduces the input exactly") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  ImageTensor img;
  img.height = 9;
  img.width = 9;
  img.data.resize(9 * 9 * 3);
  for (double& v : img.data) v = d(rng);
  const ImageTensor same = augment_image(img, AugmentDraws{});
  CHECK(same.data == img.data);
}

TEST_CASE("contrast follows v' = clamp(0.5 + c(v - 0.5))") {
  ImageTensor img;
  img.height = 1;
  img.width = 3;
  img.data = {0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0};
  AugmentDraws draws;
  draws.contrast = 0.5;
  const ImageTensor low = augment_image(img, draws);
  CHECK(low.at(0, 0, 0) == doctest::Approx(0.25));
  CHECK(low.at(0, 1, 0) == doctest::Approx(0.5));
  CHECK(low.at(0, 2, 0) == doctest::Approx(0.75));
  draws.contrast = 4.0;
  const ImageTensor high = augment_image(img, draws);
  CHECK(high.at(0, 0, 0) == 0.0);  // clamped
  CHECK(high.at(0, 2, 0) == 1.0);
}

TEST_CASE("rotation by 90 degrees permutes an asymmetric image as expected") {
  // One bright pixel off-center; after a 90-degree rotation it must land
  // at the corresponding rotated position (odd side keeps the grid exact).
  ImageTensor img;
  img.height = 5;
  img.width = 5;
  img.data.assign(5 * 5 * 3, 0.0);
  img.at(1, 2, 0) = 1.0;  // above center
  AugmentDraws draws;
  draws.rotation_deg = 90.0;
  const ImageTensor rot = augment_image(img, draws);
  double total = 0.0;
  for (double v : rot.data) total += v;
  CHECK(total == doctest::Approx(1.0));
  const bool left = rot.at(2, 1, 0) == doctest::Approx(1.0).epsilon(1e-9);
  const bool right = rot.at(2, 3, 0) == doctest::Approx(1.0).epsilon(1e-9);
  CHECK((left || right));
}

TEST_CASE("zooming out pads the border with zeros") {
  ImageTensor img;
  img.height = 8;
  img.width = 8;
  img.data.assign(8 * 8 * 3, 1.0);
  AugmentDraws draws;
  draws.zoom = 0.5;
  const ImageTensor z = augment_image(img, draws);
  CHECK(z.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(z.at(4, 4, 0) == doctest::Approx(1.0));
}

TEST_CASE("png write/read round-trips 8-bit RGB") {
  std::mt19937_64 rng(12);
  RawImage img;
  img.height = 13;
  img.width = 17;
  img.data.resize(13 * 17 * 3);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(rng() & 0xff);

  const fs::path dir = fs::temp_directory_path() /
                       ("png_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path path = dir / "t.png";
  write_png(path, img);
  const RawImage back = read_png(path);
  CHECK(back.height == img.height);
  CHECK(back.width == img.width);
  CHECK(back.data == img.data);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), MissingImage);
  fs::remove_all(dir);
}
