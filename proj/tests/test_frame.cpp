#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <unistd.h>

#include "handfuse/errors.hpp"
#include "handfuse/frame.hpp"
#include "handfuse/frame_csv.hpp"

using namespace handfuse;
namespace fs = std::filesystem;

namespace {

HandFrame random_hand(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-200.0, 200.0);
  auto v = [&] { return Vec3{d(rng), d(rng), d(rng)}; };
  HandFrame h;
  h.present = 1.0;
  h.arm = {v(), v(), d(rng)};
  h.palm.position = v();
  h.palm.velocity = v();
  h.palm.normal = v();
  h.palm.pitch = d(rng);
  h.palm.roll = d(rng);
  h.palm.yaw = d(rng);
  h.palm.palm_normal_angle = d(rng);
  for (auto& finger : h.fingers) {
    for (auto& bone : finger) {
      bone = {v(), v(), std::abs(d(rng)), d(rng)};
    }
  }
  return h;
}

fs::path temp_dir() {
  const fs::path dir =
      fs::temp_directory_path() / ("frame_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("flatten/unflatten round-trips random frames bit-exactly") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const HandFrame left = random_hand(rng);
    const HandFrame right = random_hand(rng);
    const FrameVector flat = flatten_frame(left, right);
    static_assert(std::tuple_size<FrameVector>::value == 362);
    const auto [l2, r2] = unflatten_frame(flat);
    CHECK(l2 == left);
    CHECK(r2 == right);
    CHECK(flatten_frame(l2, r2) == flat);
  }
}

TEST_CASE("presence flags sit at the canonical tail positions") {
  HandFrame left;
  left.present = 1.0;
  const FrameVector flat = flatten_frame(left, HandFrame{});
  CHECK(flat[kLeftPresentIndex] == 1.0);
  CHECK(flat[kRightPresentIndex] == 0.0);
}

TEST_CASE("unflatten rejects wrong lengths") {
  std::vector<double> short_vec(361, 0.0);
  CHECK_THROWS_AS(unflatten_frame(short_vec), WrongLength);
  std::vector<double> long_vec(363, 0.0);
  CHECK_THROWS_AS(unflatten_frame(long_vec), WrongLength);
}

TEST_CASE("column names are unique, canonical and 362 long") {
  const auto& names = feature_column_names();
  REQUIRE(names.size() == 362);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 362);
  CHECK(names[0] == "left_arm_start_x");
  CHECK(names[kLeftPresentIndex] == "left_present");
  CHECK(names[kRightPresentIndex] == "right_present");
  // Bone columns follow finger-major, bone-minor order.
  CHECK(names[7 + 13] == "left_thumb_metacarpal_start_x");
  CHECK(names[kHandBlockSize] == "right_arm_start_x");
}

TEST_CASE("derived angles are recomputed from positions and idempotent") {
  std::mt19937_64 rng(11);
  HandFrame h = random_hand(rng);
  const HandFrame d1 = derive_hand_features(h);

  // Arm angle oracle: angle between the arm direction and vertical is
  // not the contract; the contract is angle(start, end) of the stored
  // vectors, so check against angle_between directly.
  CHECK(d1.arm.angle == angle_between(h.arm.start, h.arm.end));
  CHECK(d1.palm.palm_normal_angle ==
        angle_between(h.palm.position, h.palm.normal));
  for (int f = 0; f < 5; ++f) {
    for (int b = 0; b < 4; ++b) {
      CHECK(d1.fingers[f][b].angle ==
            angle_between(h.fingers[f][b].start, h.fingers[f][b].end));
      CHECK(d1.fingers[f][b].width == h.fingers[f][b].width);
    }
  }
  CHECK(derive_hand_features(d1) == d1);
}

TEST_CASE("csv round-trip is lossless including NaN cells") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  FrameTable table;
  table.values.resize(73, kFrameValues);
  for (int r = 0; r < 73; ++r) {
    for (int c = 0; c < kFrameValues; ++c) {
      table.values(r, c) = d(rng);
    }
    table.timestamps.push_back("2024-01-01T00:00:" + std::to_string(r) + "Z");
  }
  table.values(0, 0) = std::numeric_limits<double>::quiet_NaN();
  table.values(72, 361) = std::numeric_limits<double>::quiet_NaN();
  table.values(3, 7) = 0x1.fffffffffffffp+100;  // awkward shortest-repr case

  const fs::path dir = temp_dir();
  const fs::path path = dir / "frames.csv";
  write_frames_csv(path, table);
  const FrameTable back = read_frames_csv(path);

  REQUIRE(back.values.rows() == 73);
  REQUIRE(back.values.cols() == kFrameValues);
  for (int r = 0; r < 73; ++r) {
    for (int c = 0; c < kFrameValues; ++c) {
      const double a = table.values(r, c);
      const double b = back.values(r, c);
      if (std::isnan(a)) {
        CHECK(std::isnan(b));
      } else {
        CHECK(a == b);
      }
    }
  }
  CHECK(back.timestamps == table.timestamps);
  fs::remove_all(dir);
}

TEST_CASE("csv reader rejects malformed input naming the file") {
  const fs::path dir = temp_dir();
  const fs::path path = dir / "bad.csv";

  SUBCASE("wrong header") {
    std::ofstream(path) << "frame,oops\n";
    CHECK_THROWS_AS(read_frames_csv(path), MalformedCsv);
  }
  SUBCASE("wrong column count") {
    FrameTable table;
    table.values = Eigen::MatrixXd::Zero(1, kFrameValues);
    table.timestamps = {"t"};
    write_frames_csv(path, table);
    std::ofstream(path, std::ios::app) << "1,2,3\n";
    CHECK_THROWS_AS(read_frames_csv(path), MalformedCsv);
  }
  SUBCASE("unparseable value") {
    FrameTable table;
    table.values = Eigen::MatrixXd::Zero(1, kFrameValues);
    table.timestamps = {"t"};
    write_frames_csv(path, table);
    std::string text;
    {
      std::ifstream in(path);
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    const auto pos = text.find("\n0,0");
    REQUIRE(pos != std::string::npos);
    text.replace(pos + 3, 1, "x");
    std::ofstream(path, std::ios::trunc) << text;
    CHECK_THROWS_AS(read_frames_csv(path), MalformedCsv);
  }
  fs::remove_all(dir);
}

TEST_CASE("format_value/parse_value round-trip and NaN spelling") {
  CHECK(format_value(std::numeric_limits<double>::quiet_NaN()) == "NaN");
  CHECK(std::isnan(parse_value("NaN")));
  CHECK(std::isnan(parse_value("nan")));
  CHECK(parse_value(format_value(0.1)) == 0.1);
  CHECK(parse_value(format_value(-1.0 / 3.0)) == -1.0 / 3.0);
  CHECK_THROWS_AS(parse_value("12x"), MalformedCsv);
  CHECK_THROWS_AS(parse_value(""), MalformedCsv);
}
