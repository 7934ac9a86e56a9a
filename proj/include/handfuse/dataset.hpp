#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "handfuse/preprocessing.hpp"

namespace handfuse {

inline constexpr int kFramesPerRepetition = 73;
inline constexpr int kRepresentativeFrame = 36;  // middle of 0..72

/// One labeled gesture repetition: the 73 x 362 motion matrix (raw
/// values may contain NaN until imputed) plus one representative image.
struct GestureSample {
  std::string label;
  int class_index = -1;
  Eigen::MatrixXd frames;  // 73 x 362
  ImageTensor image;
  int repetition_id = -1;
};

/// Dense, lexicographically ordered sign-name <-> index map.
class LabelTable {
 public:
  LabelTable() = default;
  explicit LabelTable(std::vector<std::string> sorted_names);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const { return names_.at(index); }
  const std::vector<std::string>& names() const { return names_; }
  /// Throws IndexOutOfRange for unknown names.
  int index(const std::string& name) const;

  bool operator==(const LabelTable&) const = default;

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  std::uint64_t seed = 0;
};

/// Index sets into the originating sample sequence; disjoint and
/// exhaustive, every class present in each part.
struct Split {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

/// Forces a repetition to exactly `target` rows: long inputs keep the
/// first `target` rows, short inputs repeat the final row. Throws
/// EmptySequence on zero rows.
Eigen::MatrixXd normalize_length(const Eigen::MatrixXd& frames,
                                 int target = kFramesPerRepetition);

struct Dataset {
  LabelTable labels;
  std::vector<GestureSample> samples;
};

/// Loads a corpus laid out as root/<sign>/rep_NN/{frames.csv,
/// frame_FF.png}. The representative image is the middle frame's,
/// preprocessed to image_side. Sample order is deterministic: signs
/// lexicographic, repetitions numeric.
Dataset load_dataset(const std::filesystem::path& root, int image_side = 224,
                     int representative_frame = kRepresentativeFrame);

/// Deterministic per-class stratified split. Per class the train share
/// is floor(train_frac * n) capped so val and test each keep at least
/// one sample; the val/test remainder is balanced globally by largest
/// remainder. Throws TooFewSamples naming the first class with < 3
/// samples.
Split stratified_split(const std::vector<GestureSample>& samples,
                       const SplitSpec& spec);

}  // namespace handfuse
