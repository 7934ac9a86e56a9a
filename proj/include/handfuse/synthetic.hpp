#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

namespace handfuse {

enum class SynthMode { joint, split_signal };

SynthMode synth_mode_from_string(const std::string& s);
std::string to_string(SynthMode mode);

/// Parameters of a deterministic synthetic corpus.
///
/// joint mode: each class defines a palm-trajectory sinusoid in the leap
/// frames and a bright rectangle at a class-specific grid cell in the
/// images, so either modality alone identifies the class.
///
/// split_signal mode: the class index factors as k = a * B + b with
/// A * B = classes; the leap frames encode only a, the images encode
/// only b. A single modality is therefore capped at 1/B (leap) or 1/A
/// (image) accuracy while fusion can reach ~1.
struct SynthSpec {
  int classes = 18;
  int reps = 10;
  SynthMode mode = SynthMode::joint;
  std::uint64_t seed = 0;
  double noise = 0.05;   // Gaussian noise scale; 0 gives identical reps
  int image_side = 64;   // written PNG side length
};

/// The (A, B) factor pair used by split_signal mode: the most balanced
/// factorization with A >= B >= 2. Throws BadFactorization when no such
/// pair exists (prime class counts).
std::pair<int, int> split_signal_factors(int classes);

/// Writes the corpus under root: <sign>/rep_NN/frames.csv plus the 73
/// frame_FF.png images per repetition, and root/manifest.json.
/// Byte-deterministic for a fixed spec.
void generate_synthetic(const std::filesystem::path& root, const SynthSpec& spec);

}  // namespace handfuse
