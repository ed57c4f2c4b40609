#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "banet/data/cache.hpp"
#include "banet/data/dataset_io.hpp"
#include "banet/harness/train.hpp"
#include "banet/nn/matrix.hpp"

namespace banet::harness {

// One exported attention observation (a test segment seen by its fold model).
struct AttentionRow {
  std::string subject, instance, activity;
  data::Cohort cohort = data::Cohort::healthy;
  int label = 0, pred = 0;
  int abs_start = 0, unpadded_len = 0;
  std::vector<double> body_summary; // empty when the variant has no body stage
  nn::Matrix temporal;              // empty unless temporal capture requested
};

struct AuditFold {
  std::string test_subject;
  std::vector<std::string> train_subjects;
  std::vector<std::string> normalizer_sources;
  std::vector<std::string> augment_sources;
  bool test_all_original = false;
  bool disjoint = false;
  bool passed = false;
};

struct FoldTrainInfo {
  std::string test_subject;
  int epochs = 0;
  int best_epoch = 0;
  double best_val_loss = 0;
  long long train_segments = 0, val_segments = 0;
};

struct ExperimentReport {
  int schema_version = 1;
  std::string variant;
  TrainConfig config;
  std::string dataset_hash, config_hash, kernels;
  size_t param_count = 0;
  std::vector<FoldReport> folds; // sorted by test subject
  std::vector<FoldTrainInfo> training;
  std::vector<AuditFold> audit;
  double mean_accuracy = 0, mean_macro_f1 = 0;
  std::array<std::array<long long, 2>, 2> pooled{{{0, 0}, {0, 0}}};
  double pooled_accuracy = 0, pooled_macro_f1 = 0;
};

struct LosoOptions {
  bool collect_attention = false;
  bool attention_temporal = false;
  int threads = 0; // 0 = BANET_THREADS env, else hardware concurrency
  const data::SegmentsBySubject* pre_segmented = nullptr; // optional cache
};

// Window segmentation of every instance, grouped by subject (stride = 75%
// overlap of the window).
data::SegmentsBySubject segment_dataset(const data::Dataset& ds, int window);

// Per fold: fit normalizer on the training split only, normalize, augment the
// training split (test and validation stay original), train, evaluate on the
// held-out subject's original segments. Folds run concurrently and
// independently; the report does not depend on the thread count.
ExperimentReport run_loso(const data::Dataset& ds, const TrainConfig& cfg,
                          const LosoOptions& opt = {},
                          std::vector<AttentionRow>* attention_out = nullptr);

int resolve_threads(int requested);

} // namespace banet::harness
