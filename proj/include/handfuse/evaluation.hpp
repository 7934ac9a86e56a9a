#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "handfuse/dataset.hpp"
#include "handfuse/errors.hpp"

namespace handfuse {

/// K x K counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int k) : k_(k), counts_(static_cast<std::size_t>(k) * k, 0) {}

  int classes() const { return k_; }
  long long& at(int truth, int pred) { return counts_[index(truth, pred)]; }
  long long at(int truth, int pred) const { return counts_[index(truth, pred)]; }
  long long total() const;
  long long trace() const;
  long long row_sum(int truth) const;
  long long col_sum(int pred) const;

 private:
  std::size_t index(int t, int p) const {
    if (t < 0 || t >= k_ || p < 0 || p >= k_) {
      throw IndexOutOfRange("confusion matrix index out of range");
    }
    return static_cast<std::size_t>(t) * k_ + p;
  }
  int k_ = 0;
  std::vector<long long> counts_;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                 const std::vector<int>& pred, int classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long support = 0;
};

/// Per-class precision/recall/F1/support; empty denominators yield 0.
std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& cm);

struct AggregateMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvaluationReport {
  ConfusionMatrix confusion;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  AggregateMetrics macro_avg;
  AggregateMetrics weighted_avg;
  int zero_denominator_count = 0;  // metrics forced to 0 by empty denominators
};

/// Accuracy, macro (unweighted mean) and weighted (support-weighted)
/// aggregates from a confusion matrix. Throws EmptyEvaluation when the
/// matrix has no counts.
EvaluationReport aggregate(const ConfusionMatrix& cm);

/// Table-style text report: one row per class in label order, then
/// Accuracy, Macro Avg and Weighted Avg rows. Values are rounded
/// half-away-from-zero to two decimals; labels pass through verbatim.
std::string format_report(const EvaluationReport& report,
                          const LabelTable& labels);

/// Full-precision machine-readable mirror of the report.
nlohmann::json report_to_json(const EvaluationReport& report,
                              const LabelTable& labels);

/// Confusion matrix CSV with a label header row and column.
void write_confusion_csv(const std::filesystem::path& path,
                         const ConfusionMatrix& cm, const LabelTable& labels);

}  // namespace handfuse
