#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace banet::harness {

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
};

struct FoldReport {
  std::string test_subject;
  // confusion[truth][pred], class 1 = protective
  std::array<std::array<long long, 2>, 2> confusion{{{0, 0}, {0, 0}}};
  double accuracy = 0;
  double macro_f1 = 0;
  std::array<ClassMetrics, 2> per_class{};
  long long test_segments = 0;
};

// Metrics conventions: a class absent from both truth and prediction
// contributes F1 = 1 (vacuous); otherwise F1 = 2TP/(2TP+FP+FN). macro-F1 is
// the unweighted mean of the two class F1 scores.
FoldReport evaluate_counts(std::span<const int> labels, std::span<const int> preds,
                           const std::string& test_subject);

FoldReport report_from_confusion(const std::array<std::array<long long, 2>, 2>& m,
                                 const std::string& test_subject);

} // namespace banet::harness
