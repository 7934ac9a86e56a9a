#include "handfuse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "handfuse/errors.hpp"
#include "handfuse/frame_csv.hpp"
#include "handfuse/image_io.hpp"

namespace handfuse {
namespace {

namespace fs = std::filesystem;

bool parse_rep_dir_name(const std::string& name, int* rep_id) {
  if (name.rfind("rep_", 0) != 0 || name.size() <= 4) return false;
  int id = 0;
  for (std::size_t i = 4; i < name.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
    id = id * 10 + (name[i] - '0');
  }
  *rep_id = id;
  return true;
}

std::string frame_image_name(int frame_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%02d.png", frame_index);
  return buf;
}

}  // namespace

LabelTable::LabelTable(std::vector<std::string> sorted_names)
    : names_(std::move(sorted_names)) {
  for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
    index_[names_[i]] = i;
  }
}

int LabelTable::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw IndexOutOfRange("unknown sign name '" + name + "'");
  }
  return it->second;
}

Eigen::MatrixXd normalize_length(const Eigen::MatrixXd& frames, int target) {
  if (frames.rows() == 0) {
    throw EmptySequence("cannot length-normalize an empty repetition");
  }
  if (frames.rows() == target) {
    return frames;
  }
  Eigen::MatrixXd out(target, frames.cols());
  const Eigen::Index keep = std::min<Eigen::Index>(frames.rows(), target);
  out.topRows(keep) = frames.topRows(keep);
  for (Eigen::Index r = keep; r < target; ++r) {
    out.row(r) = frames.row(frames.rows() - 1);
  }
  return out;
}

Dataset load_dataset(const fs::path& root, int image_side,
                     int representative_frame) {
  if (!fs::exists(root) || !fs::is_directory(root)) {
    throw UnknownLayout("corpus root is not a directory: " + root.string());
  }

  std::vector<std::string> sign_names;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) {
      sign_names.push_back(entry.path().filename().string());
    }
  }
  std::sort(sign_names.begin(), sign_names.end());

  Dataset ds;
  ds.labels = LabelTable(sign_names);
  for (const auto& sign : sign_names) {
    const fs::path sign_dir = root / sign;
    std::vector<std::pair<int, fs::path>> reps;
    for (const auto& entry : fs::directory_iterator(sign_dir)) {
      if (!entry.is_directory()) {
        throw UnknownLayout("unexpected file in sign directory: " +
                            entry.path().string());
      }
      int rep_id = 0;
      if (!parse_rep_dir_name(entry.path().filename().string(), &rep_id)) {
        throw UnknownLayout("unexpected directory name: " +
                            entry.path().string());
      }
      reps.emplace_back(rep_id, entry.path());
    }
    if (reps.empty()) {
      throw UnknownLayout("sign directory has no repetitions: " +
                          sign_dir.string());
    }
    std::sort(reps.begin(), reps.end());

    for (const auto& [rep_id, rep_dir] : reps) {
      const fs::path csv_path = rep_dir / "frames.csv";
      if (!fs::exists(csv_path)) {
        throw MalformedCsv("missing frames.csv: " + csv_path.string());
      }
      FrameTable table = read_frames_csv(csv_path);
      if (table.values.rows() == 0) {
        throw MalformedCsv("no frame rows in " + csv_path.string());
      }

      const fs::path img_path = rep_dir / frame_image_name(representative_frame);
      GestureSample sample;
      sample.label = sign;
      sample.class_index = ds.labels.index(sign);
      sample.frames = normalize_length(table.values);
      sample.image = preprocess_image(read_png(img_path), image_side);
      sample.repetition_id = rep_id;
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

Split stratified_split(const std::vector<GestureSample>& samples,
                       const SplitSpec& spec) {
  if (spec.train_frac <= 0.0 || spec.val_frac <= 0.0 || spec.test_frac <= 0.0 ||
      std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be positive and sum to 1");
  }

  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    by_class[samples[i].class_index].push_back(i);
  }
  for (const auto& [cls, idx] : by_class) {
    if (idx.size() < 3) {
      throw TooFewSamples("class '" + samples[idx.front()].label +
                          "' has fewer than 3 samples");
    }
  }

  std::mt19937_64 rng(spec.seed);

  // Per-class train share and exact val quota over the remainder.
  struct ClassPlan {
    int cls;
    std::vector<int> shuffled;
    int n_train;
    int n_val;
    double remainder;
  };
  std::vector<ClassPlan> plans;
  double quota_total = 0.0;
  int base_val_total = 0;
  for (auto& [cls, idx] : by_class) {
    ClassPlan plan;
    plan.cls = cls;
    plan.shuffled = idx;
    std::shuffle(plan.shuffled.begin(), plan.shuffled.end(), rng);
    const int n = static_cast<int>(idx.size());
    plan.n_train = std::max(
        1, std::min(static_cast<int>(std::floor(spec.train_frac * n)), n - 2));
    const int rest = n - plan.n_train;
    const double quota =
        rest * spec.val_frac / (spec.val_frac + spec.test_frac);
    plan.n_val = std::clamp(static_cast<int>(std::floor(quota)), 1, rest - 1);
    plan.remainder = quota - plan.n_val;
    quota_total += quota;
    base_val_total += plan.n_val;
    plans.push_back(std::move(plan));
  }

  // Balance global val count by largest remainder, seeded tie-break.
  int extras = static_cast<int>(std::llround(quota_total)) - base_val_total;
  if (extras > 0) {
    std::vector<int> order(plans.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return plans[a].remainder > plans[b].remainder;
    });
    for (int oi : order) {
      if (extras == 0) break;
      ClassPlan& plan = plans[oi];
      const int rest = static_cast<int>(plan.shuffled.size()) - plan.n_train;
      if (plan.n_val + 1 <= rest - 1) {
        ++plan.n_val;
        --extras;
      }
    }
  }

  Split split;
  for (const ClassPlan& plan : plans) {
    const auto& s = plan.shuffled;
    split.train.insert(split.train.end(), s.begin(), s.begin() + plan.n_train);
    split.val.insert(split.val.end(), s.begin() + plan.n_train,
                     s.begin() + plan.n_train + plan.n_val);
    split.test.insert(split.test.end(), s.begin() + plan.n_train + plan.n_val,
                      s.end());
  }
  return split;
}

}  // namespace handfuse
