#include "handfuse/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace handfuse {
namespace {

// Two decimals, half away from zero.
std::string round2(double v) {
  const long long scaled = std::llround(v * 100.0);
  std::ostringstream os;
  if (scaled < 0) os << '-';
  const long long a = std::llabs(scaled);
  os << a / 100 << '.' << (a % 100 < 10 ? "0" : "") << a % 100;
  return os.str();
}

}  // namespace

long long ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), 0LL);
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (int i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

long long ConfusionMatrix::row_sum(int truth) const {
  long long s = 0;
  for (int p = 0; p < k_; ++p) s += at(truth, p);
  return s;
}

long long ConfusionMatrix::col_sum(int pred) const {
  long long s = 0;
  for (int t = 0; t < k_; ++t) s += at(t, pred);
  return s;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                 const std::vector<int>& pred, int classes) {
  if (truth.size() != pred.size()) {
    throw LengthMismatch("truth and prediction lists differ in length");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++cm.at(truth[i], pred[i]);
  }
  return cm;
}

std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out;
  out.reserve(cm.classes());
  for (int c = 0; c < cm.classes(); ++c) {
    ClassMetrics m;
    const long long tp = cm.at(c, c);
    const long long col = cm.col_sum(c);
    const long long row = cm.row_sum(c);
    m.precision = col > 0 ? static_cast<double>(tp) / col : 0.0;
    m.recall = row > 0 ? static_cast<double>(tp) / row : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.support = row;
    out.push_back(m);
  }
  return out;
}

EvaluationReport aggregate(const ConfusionMatrix& cm) {
  const long long total = cm.total();
  if (total == 0) {
    throw EmptyEvaluation("confusion matrix has no counts");
  }
  EvaluationReport report;
  report.confusion = cm;
  report.per_class = class_metrics(cm);
  report.accuracy = static_cast<double>(cm.trace()) / total;

  const int k = cm.classes();
  double support_sum = 0.0;
  for (int c = 0; c < k; ++c) {
    const ClassMetrics& m = report.per_class[c];
    report.macro_avg.precision += m.precision / k;
    report.macro_avg.recall += m.recall / k;
    report.macro_avg.f1 += m.f1 / k;
    report.weighted_avg.precision += m.support * m.precision;
    report.weighted_avg.recall += m.support * m.recall;
    report.weighted_avg.f1 += m.support * m.f1;
    support_sum += m.support;
    if (cm.col_sum(c) == 0) ++report.zero_denominator_count;
    if (cm.row_sum(c) == 0) ++report.zero_denominator_count;
  }
  report.weighted_avg.precision /= support_sum;
  report.weighted_avg.recall /= support_sum;
  report.weighted_avg.f1 /= support_sum;
  return report;
}

std::string format_report(const EvaluationReport& report,
                          const LabelTable& labels) {
  std::ostringstream os;
  os << "Label\tPrecision\tRecall\tF1-Score\tSupport\n";
  for (int c = 0; c < labels.size(); ++c) {
    const ClassMetrics& m = report.per_class.at(c);
    os << labels.name(c) << '\t' << round2(m.precision) << '\t'
       << round2(m.recall) << '\t' << round2(m.f1) << '\t' << m.support << '\n';
  }
  const long long total = report.confusion.total();
  os << "Accuracy\t\t\t" << round2(report.accuracy) << '\t' << total << '\n';
  os << "Macro Avg\t" << round2(report.macro_avg.precision) << '\t'
     << round2(report.macro_avg.recall) << '\t' << round2(report.macro_avg.f1)
     << '\t' << total << '\n';
  os << "Weighted Avg\t" << round2(report.weighted_avg.precision) << '\t'
     << round2(report.weighted_avg.recall) << '\t'
     << round2(report.weighted_avg.f1) << '\t' << total << '\n';
  return os.str();
}

nlohmann::json report_to_json(const EvaluationReport& report,
                              const LabelTable& labels) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  nlohmann::json per_class = nlohmann::json::array();
  for (int c = 0; c < labels.size(); ++c) {
    const ClassMetrics& m = report.per_class.at(c);
    per_class.push_back({{"label", labels.name(c)},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support}});
  }
  j["per_class"] = per_class;
  j["macro_avg"] = {{"precision", report.macro_avg.precision},
                    {"recall", report.macro_avg.recall},
                    {"f1", report.macro_avg.f1}};
  j["weighted_avg"] = {{"precision", report.weighted_avg.precision},
                       {"recall", report.weighted_avg.recall},
                       {"f1", report.weighted_avg.f1}};
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < report.confusion.classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < report.confusion.classes(); ++p) {
      row.push_back(report.confusion.at(t, p));
    }
    rows.push_back(row);
  }
  j["confusion"] = rows;
  j["zero_denominator_count"] = report.zero_denominator_count;
  return j;
}

void write_confusion_csv(const std::filesystem::path& path,
                         const ConfusionMatrix& cm, const LabelTable& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  out << "true\\pred";
  for (int p = 0; p < cm.classes(); ++p) {
    out << ',' << labels.name(p);
  }
  out << '\n';
  for (int t = 0; t < cm.classes(); ++t) {
    out << labels.name(t);
    for (int p = 0; p < cm.classes(); ++p) {
      out << ',' << cm.at(t, p);
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

}  // namespace handfuse
