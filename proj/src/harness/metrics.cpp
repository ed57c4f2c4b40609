#include "banet/harness/metrics.hpp"

#include "banet/common.hpp"

namespace banet::harness {

FoldReport report_from_confusion(const std::array<std::array<long long, 2>, 2>& m,
                                 const std::string& test_subject) {
  FoldReport r;
  r.test_subject = test_subject;
  r.confusion = m;
  r.test_segments = m[0][0] + m[0][1] + m[1][0] + m[1][1];
  if (r.test_segments == 0) throw usage_error("evaluate: empty test set");
  r.accuracy = static_cast<double>(m[0][0] + m[1][1]) / static_cast<double>(r.test_segments);
  double f1_sum = 0;
  for (int cls = 0; cls < 2; ++cls) {
    const long long tp = m[cls][cls];
    const long long fp = m[1 - cls][cls];
    const long long fn = m[cls][1 - cls];
    ClassMetrics& cm = r.per_class[static_cast<size_t>(cls)];
    if (tp + fn == 0 && fp == 0) {
      cm.precision = cm.recall = cm.f1 = 1.0; // class absent everywhere
    } else {
      cm.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                                 : (fn == 0 ? 1.0 : 0.0);
      cm.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                              : (fp == 0 ? 1.0 : 0.0);
      cm.f1 = static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    }
    f1_sum += cm.f1;
  }
  r.macro_f1 = f1_sum / 2.0;
  return r;
}

FoldReport evaluate_counts(std::span<const int> labels, std::span<const int> preds,
                           const std::string& test_subject) {
  if (labels.size() != preds.size())
    throw usage_error("evaluate: labels/preds size mismatch");
  if (labels.empty()) throw usage_error("evaluate: empty test set");
  std::array<std::array<long long, 2>, 2> m{{{0, 0}, {0, 0}}};
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 1 || preds[i] < 0 || preds[i] > 1)
      throw usage_error("evaluate: labels must be binary");
    m[static_cast<size_t>(labels[i])][static_cast<size_t>(preds[i])] += 1;
  }
  return report_from_confusion(m, test_subject);
}

} // namespace banet::harness
