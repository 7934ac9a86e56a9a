#include "handfuse/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include <json.hpp>

#include "handfuse/dataset.hpp"
#include "handfuse/errors.hpp"
#include "handfuse/frame.hpp"
#include "handfuse/frame_csv.hpp"
#include "handfuse/image_io.hpp"

namespace handfuse {
namespace {

constexpr double kTwoPi = 6.28318530717958647692;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  return mix64(mix64(mix64(seed ^ a) ^ b) ^ c);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; avoids the implementation-defined std::normal_distribution.
double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 == 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

Vec3 jitter(const Vec3& v, double sigma, std::mt19937_64& rng) {
  return {v.x + sigma * gaussian(rng), v.y + sigma * gaussian(rng),
          v.z + sigma * gaussian(rng)};
}

// Class-part signal embedded in the left hand's trajectory. `part` in
// [0, parts) selects frequency and phase.
HandFrame make_hand(int part, int parts, int t, int total_frames, double noise,
                    std::mt19937_64& rng) {
  const double freq = 1.0 + 0.5 * part;
  const double phase = kTwoPi * part / parts;
  const double u = kTwoPi * freq * t / total_frames + phase;
  const double sigma = noise * 5.0;

  HandFrame h;
  h.present = 1.0;
  h.palm.position = jitter({60.0 * std::cos(u), 180.0 + 80.0 * std::sin(u),
                            40.0 * std::sin(u + phase)},
                           sigma, rng);
  h.palm.velocity = jitter({-60.0 * std::sin(u), 80.0 * std::cos(u),
                            40.0 * std::cos(u + phase)},
                           sigma, rng);
  h.palm.normal = jitter({0.2 * std::sin(u), -1.0, 0.2 * std::cos(u)}, noise, rng);
  h.palm.pitch = 0.4 * std::sin(u) + noise * gaussian(rng);
  h.palm.roll = 0.3 * std::cos(u) + noise * gaussian(rng);
  h.palm.yaw = 0.2 * std::sin(u + phase) + noise * gaussian(rng);

  h.arm.start = jitter({10.0, 80.0, 90.0}, sigma, rng);
  h.arm.end = jitter({h.palm.position.x, h.palm.position.y - 40.0,
                      h.palm.position.z + 20.0},
                     sigma, rng);

  for (int f = 0; f < 5; ++f) {
    for (int b = 0; b < 4; ++b) {
      BoneRecord& bone = h.fingers[f][b];
      const Vec3 base{h.palm.position.x + 12.0 * (f - 2),
                      h.palm.position.y + 20.0 + 14.0 * b,
                      h.palm.position.z - 10.0};
      bone.start = jitter(base, sigma, rng);
      bone.end = jitter({base.x, base.y + 12.0, base.z - 4.0}, sigma, rng);
      bone.width = std::max(0.0, 10.0 - 1.5 * b + noise * gaussian(rng));
    }
  }
  return derive_hand_features(h);
}

struct Cell {
  double y0, y1, x0, x1;  // fractional bounds of the bright rectangle
};

Cell joint_cell(int k, int classes) {
  const int rows = std::max(1, static_cast<int>(std::floor(std::sqrt(
                                   static_cast<double>(classes)))));
  const int cols = (classes + rows - 1) / rows;
  const int r = k / cols;
  const int c = k % cols;
  const double ch = 1.0 / rows;
  const double cw = 1.0 / cols;
  return {r * ch + 0.25 * ch, (r + 1) * ch - 0.25 * ch,
          c * cw + 0.25 * cw, (c + 1) * cw - 0.25 * cw};
}

Cell split_cell(int b, int parts) {
  const double cw = 1.0 / parts;
  return {0.35, 0.65, b * cw + 0.25 * cw, (b + 1) * cw - 0.25 * cw};
}

RawImage make_image(const Cell& cell, int side, std::mt19937_64& rng) {
  RawImage img;
  img.height = side;
  img.width = side;
  img.data.resize(static_cast<std::size_t>(side) * side * 3);
  const int y0 = static_cast<int>(cell.y0 * side);
  const int y1 = static_cast<int>(cell.y1 * side);
  const int x0 = static_cast<int>(cell.x0 * side);
  const int x1 = static_cast<int>(cell.x1 * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const bool bright = y >= y0 && y < y1 && x >= x0 && x < x1;
      for (int c = 0; c < 3; ++c) {
        const int v = bright ? 220 + static_cast<int>(rng() % 36)
                             : static_cast<int>(rng() % 60);
        img.at(y, x, c) = static_cast<std::uint8_t>(v);
      }
    }
  }
  return img;
}

std::string timestamp_for_frame(int t) {
  const int ms = t * 200;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "2024-01-01T00:00:%02d.%03dZ", ms / 1000,
                ms % 1000);
  return buf;
}

std::string sign_name(int k, int classes) {
  int width = 2;
  for (int v = classes - 1; v >= 100; v /= 10) ++width;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sign_%0*d", width, k);
  return buf;
}

}  // namespace

SynthMode synth_mode_from_string(const std::string& s) {
  if (s == "joint") return SynthMode::joint;
  if (s == "split_signal") return SynthMode::split_signal;
  throw ConfigError("unknown synthesis mode '" + s + "'");
}

std::string to_string(SynthMode mode) {
  return mode == SynthMode::joint ? "joint" : "split_signal";
}

std::pair<int, int> split_signal_factors(int classes) {
  for (int d = static_cast<int>(std::sqrt(static_cast<double>(classes))); d >= 2;
       --d) {
    if (classes % d == 0) {
      return {classes / d, d};  // A = leap part count, B = image part count
    }
  }
  throw BadFactorization("class count " + std::to_string(classes) +
                         " has no factorization a*b with a, b >= 2");
}

void generate_synthetic(const std::filesystem::path& root, const SynthSpec& spec) {
  if (spec.classes < 2) throw ConfigError("need at least 2 classes");
  if (spec.reps < 3) throw ConfigError("need at least 3 repetitions per class");

  int leap_parts = spec.classes;
  int image_parts = spec.classes;
  if (spec.mode == SynthMode::split_signal) {
    const auto [a, b] = split_signal_factors(spec.classes);
    leap_parts = a;
    image_parts = b;
  }

  std::filesystem::create_directories(root);
  std::vector<std::string> signs;
  for (int k = 0; k < spec.classes; ++k) {
    signs.push_back(sign_name(k, spec.classes));
  }

  for (int k = 0; k < spec.classes; ++k) {
    const int leap_part =
        spec.mode == SynthMode::split_signal ? k / image_parts : k;
    const int image_part =
        spec.mode == SynthMode::split_signal ? k % image_parts : k;
    const Cell cell = spec.mode == SynthMode::split_signal
                          ? split_cell(image_part, image_parts)
                          : joint_cell(k, spec.classes);

    for (int r = 0; r < spec.reps; ++r) {
      char rep_name[16];
      std::snprintf(rep_name, sizeof(rep_name), "rep_%02d", r);
      const auto rep_dir = root / signs[k] / rep_name;
      std::filesystem::create_directories(rep_dir);

      std::mt19937_64 leap_rng(sub_seed(spec.seed, k, r, 0));
      FrameTable table;
      table.values.resize(kFramesPerRepetition, kFrameValues);
      for (int t = 0; t < kFramesPerRepetition; ++t) {
        const HandFrame left = make_hand(leap_part, leap_parts, t,
                                         kFramesPerRepetition, spec.noise,
                                         leap_rng);
        const FrameVector row = flatten_frame(left, HandFrame{});
        for (int c = 0; c < kFrameValues; ++c) {
          table.values(t, c) = row[c];
        }
        table.timestamps.push_back(timestamp_for_frame(t));
      }
      write_frames_csv(rep_dir / "frames.csv", table);

      for (int t = 0; t < kFramesPerRepetition; ++t) {
        std::mt19937_64 img_rng(sub_seed(spec.seed, k, r, 1000 + t));
        char img_name[32];
        std::snprintf(img_name, sizeof(img_name), "frame_%02d.png", t);
        write_png(rep_dir / img_name, make_image(cell, spec.image_side, img_rng));
      }
    }
  }

  nlohmann::json manifest;
  manifest["signs"] = signs;
  manifest["repetitions"] = spec.reps;
  manifest["frames_per_repetition"] = kFramesPerRepetition;
  std::ofstream out(root / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) {
    throw IoError("failed to write manifest: " + (root / "manifest.json").string());
  }
}

}  // namespace handfuse
