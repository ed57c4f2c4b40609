#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "banet/nn/layers.hpp"
#include "banet/nn/matrix.hpp"
#include "banet/nn/param_store.hpp"
#include "banet/nn/rng.hpp"

namespace banet::zoo {

enum class Variant {
  banet,
  banet_time,
  banet_body,
  banet_dense,
  banet_compatible,
  stacked_lstm,
  bi_lstm,
  conv_lstm,
};

std::string to_string(Variant v);
Variant variant_from_string(std::string_view s); // throws usage_error on unknown
std::vector<Variant> all_variants();
bool variant_has_attention(Variant v);

struct ModelSpec {
  Variant variant = Variant::banet;
  int parts = 13;            // C
  int features_per_part = 2; // angle + energy
  int window = 180;          // T
  int hidden = 0;            // 0 = per-variant default (8 / 28 / 14 / 28)
  int lstm_layers = 3;
  int classes = 2;
  double dropout = 0.5;
  int conv_filters = 10, conv_kernel = 10, pool = 2; // conv-lstm only

  int input_dim() const { return parts * features_per_part; }
  int resolved_hidden() const;
};

// Scores captured during one forward pass. temporal rows and body rows are
// probability distributions (softmax over time / over parts).
struct AttentionRecord {
  nn::Matrix temporal;              // C x T (1 x T for banet-compatible)
  nn::Matrix body;                  // K x C (2 x C time-mean for banet-compatible)
  std::vector<double> body_summary; // per-part mean of body rows
};

struct BatchView {
  // Each sample: window x (2*parts) row-major, columns part-blocked as
  // (angle_1, energy_1, angle_2, energy_2, ...).
  std::span<const double* const> x;
  std::span<const int> labels; // empty allowed for inference
};

class Model {
public:
  Model(const ModelSpec& spec, std::uint64_t seed);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // deep copy (parameters included)
  Model clone() const;

  const ModelSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  size_t param_count() const { return ps_.size(); }
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

  // Accumulates d(mean batch cross-entropy)/d(theta) into the store's
  // gradient array (zeroed first); returns the mean loss. Dropout draws are a
  // pure function of (rng, position in batch), so repeated calls are
  // bit-identical.
  double compute_gradients(const BatchView& batch, const nn::Rng& rng,
                           std::vector<double>* probs_out = nullptr);

  // Forward-only mean loss with the same dropout draws as compute_gradients.
  double mean_loss(const BatchView& batch, nn::Mode mode, const nn::Rng& rng) const;

  // Inference-mode class probabilities, flattened [batch x classes]. Pure and
  // safe for concurrent use on a const model. attention requires a variant
  // that exposes attention scores.
  void predict(const BatchView& batch, std::vector<double>& probs,
               std::vector<AttentionRecord>* attention = nullptr) const;

  // Per-part encoder output (T x K, inference mode): the shared-LSTM view
  // used by the attention stages. banet-family variants only.
  nn::Matrix encode_part(std::span<const double> segment, int part) const;

private:
  struct Work;
  double forward_backward(const BatchView& batch, nn::Mode mode, const nn::Rng& rng,
                          bool backward, Work& work, std::vector<double>* probs_out,
                          std::vector<AttentionRecord>* attention) const;

  ModelSpec spec_;
  std::uint64_t seed_ = 0;
  nn::ParamStore ps_;

  // banet family
  nn::LstmStack stack_;
  std::vector<nn::Conv1x1> tconvs_;
  nn::DenseLayer tdense_; // banet-dense scorer over the flattened T*K block
  nn::DenseLayer fc1_, fc2_;
  nn::DenseLayer clf_;
  // bi-lstm
  std::vector<nn::LstmLayer> bi_fwd_, bi_bwd_;
  // conv-lstm
  nn::Conv1dLayer conv_;
  nn::LstmLayer clstm_;

  std::unique_ptr<Work> work_;
};

} // namespace banet::zoo
