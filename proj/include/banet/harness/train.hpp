#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "banet/data/types.hpp"
#include "banet/harness/metrics.hpp"
#include "banet/nn/rng.hpp"
#include "banet/zoo/model.hpp"

namespace banet::harness {

struct TrainConfig {
  std::string variant = "banet";
  double lr = 0.003;
  int batch_size = 0; // 0 = per-variant default: 40 (20 stacked-lstm, 50 conv-lstm)
  int max_epochs = 50;
  int patience = 10;      // epochs without val-loss improvement
  double min_delta = 1e-4;
  std::uint64_t seed = 1;
  bool augment = true;
  double val_fraction = 0.2; // per-subject share of training segments held out
  int window = 180;
  int hidden = 0; // 0 = variant default
  double dropout = 0.5;

  zoo::Variant parsed_variant() const { return zoo::variant_from_string(variant); }
  int resolved_batch() const;
  zoo::ModelSpec model_spec() const;
};

// Strict parse: unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);

struct EpochStats {
  double train_loss = 0;
  double val_loss = 0;
  double val_macro_f1 = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0; // 1-based; 0 when validation is empty
  double best_val_loss = 0;
};

// Mini-batch Adam training with per-epoch shuffling from the seeded stream
// and early stopping on validation loss (patience epochs, min_delta). The
// model is left holding the best-validation-loss parameters. Validation uses
// inference mode. An empty validation set disables early stopping.
TrainResult train(zoo::Model& m, std::span<const data::Segment* const> train_segs,
                  std::span<const data::Segment* const> val_segs,
                  const TrainConfig& cfg, const nn::Rng& rng);

// Inference over segments; argmax predictions and metrics. Optionally
// captures attention records (attention-capable variants only).
FoldReport evaluate_model(const zoo::Model& m,
                          std::span<const data::Segment* const> segs,
                          const std::string& test_subject,
                          std::vector<zoo::AttentionRecord>* attention = nullptr,
                          std::vector<int>* preds_out = nullptr);

double mean_inference_loss(const zoo::Model& m,
                           std::span<const data::Segment* const> segs);

} // namespace banet::harness
