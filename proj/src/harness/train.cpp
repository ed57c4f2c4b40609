#include "banet/harness/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "banet/common.hpp"
#include "banet/nn/layers.hpp"

namespace banet::harness {

using data::Segment;
using nn::Rng;
using zoo::BatchView;
using zoo::Model;

int TrainConfig::resolved_batch() const {
  if (batch_size > 0) return batch_size;
  switch (parsed_variant()) {
    case zoo::Variant::stacked_lstm: return 20;
    case zoo::Variant::conv_lstm: return 50;
    default: return 40;
  }
}

zoo::ModelSpec TrainConfig::model_spec() const {
  zoo::ModelSpec spec;
  spec.variant = parsed_variant();
  spec.window = window;
  spec.hidden = hidden;
  spec.dropout = dropout;
  return spec;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  for (const auto& [key, val] : j.items()) {
    if (key == "variant") cfg.variant = val.get<std::string>();
    else if (key == "lr") cfg.lr = val.get<double>();
    else if (key == "batch_size") cfg.batch_size = val.get<int>();
    else if (key == "max_epochs") cfg.max_epochs = val.get<int>();
    else if (key == "patience") cfg.patience = val.get<int>();
    else if (key == "min_delta") cfg.min_delta = val.get<double>();
    else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
    else if (key == "augment") cfg.augment = val.get<bool>();
    else if (key == "val_fraction") cfg.val_fraction = val.get<double>();
    else if (key == "window") cfg.window = val.get<int>();
    else if (key == "hidden") cfg.hidden = val.get<int>();
    else if (key == "dropout") cfg.dropout = val.get<double>();
    else throw usage_error("config: unknown key '" + key + "'");
  }
  if (cfg.lr < 0 || cfg.max_epochs < 1 || cfg.patience < 0 || cfg.batch_size < 0 ||
      cfg.val_fraction < 0 || cfg.val_fraction >= 1 || cfg.window < 1)
    throw usage_error("config: value out of range");
  cfg.parsed_variant(); // validates the variant name
  return cfg;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["variant"] = cfg.variant;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.resolved_batch();
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["min_delta"] = cfg.min_delta;
  j["seed"] = cfg.seed;
  j["augment"] = cfg.augment;
  j["val_fraction"] = cfg.val_fraction;
  j["window"] = cfg.window;
  j["hidden"] = cfg.hidden;
  j["dropout"] = cfg.dropout;
  return j;
}

namespace {

BatchView make_view(const std::vector<const double*>& xs, const std::vector<int>& ys) {
  return BatchView{std::span<const double* const>(xs.data(), xs.size()),
                   std::span<const int>(ys.data(), ys.size())};
}

} // namespace

double mean_inference_loss(const Model& m, std::span<const Segment* const> segs) {
  if (segs.empty()) throw usage_error("mean_inference_loss: empty set");
  double total = 0;
  const int chunk = 256;
  for (size_t at = 0; at < segs.size(); at += chunk) {
    const size_t n = std::min<size_t>(chunk, segs.size() - at);
    std::vector<const double*> xs(n);
    std::vector<int> ys(n);
    for (size_t i = 0; i < n; ++i) {
      xs[i] = segs[at + i]->x.data();
      ys[i] = segs[at + i]->label;
    }
    total += m.mean_loss(make_view(xs, ys), nn::Mode::infer, Rng(0)) * static_cast<double>(n);
  }
  return total / static_cast<double>(segs.size());
}

FoldReport evaluate_model(const Model& m, std::span<const Segment* const> segs,
                          const std::string& test_subject,
                          std::vector<zoo::AttentionRecord>* attention,
                          std::vector<int>* preds_out) {
  if (segs.empty()) throw usage_error("evaluate: empty test set");
  std::vector<int> labels, preds;
  labels.reserve(segs.size());
  preds.reserve(segs.size());
  const int chunk = 128;
  if (attention) attention->clear();
  for (size_t at = 0; at < segs.size(); at += chunk) {
    const size_t n = std::min<size_t>(chunk, segs.size() - at);
    std::vector<const double*> xs(n);
    std::vector<int> ys(n);
    for (size_t i = 0; i < n; ++i) {
      xs[i] = segs[at + i]->x.data();
      ys[i] = segs[at + i]->label;
    }
    std::vector<double> probs;
    std::vector<zoo::AttentionRecord> att_chunk;
    m.predict(make_view(xs, ys), probs, attention ? &att_chunk : nullptr);
    const int classes = m.spec().classes;
    for (size_t i = 0; i < n; ++i) {
      const double* p = probs.data() + i * classes;
      int arg = 0;
      for (int c = 1; c < classes; ++c)
        if (p[c] > p[arg]) arg = c;
      preds.push_back(arg);
      labels.push_back(ys[i]);
    }
    if (attention)
      for (auto& a : att_chunk) attention->push_back(std::move(a));
  }
  if (preds_out) *preds_out = preds;
  return evaluate_counts(labels, preds, test_subject);
}

TrainResult train(Model& m, std::span<const Segment* const> train_segs,
                  std::span<const Segment* const> val_segs, const TrainConfig& cfg,
                  const Rng& rng) {
  if (train_segs.empty()) throw usage_error("train: empty training set");
  const int B = cfg.resolved_batch();
  nn::AdamState adam;
  adam.lr = cfg.lr;
  adam.init(m.param_count());

  TrainResult out;
  std::vector<double> best_params(m.params().all_values().begin(),
                                  m.params().all_values().end());
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_best = 0;
  const bool have_val = !val_segs.empty();

  std::vector<size_t> order(train_segs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    // per-epoch shuffle from the seeded stream
    auto sh = rng.derive(nn::rng_tag::kShuffle).derive(epoch).stream();
    for (size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[sh.next_index(i + 1)]);

    double epoch_loss = 0;
    int step = 0;
    for (size_t at = 0; at < order.size(); at += B, ++step) {
      const size_t n = std::min<size_t>(B, order.size() - at);
      std::vector<const double*> xs(n);
      std::vector<int> ys(n);
      for (size_t i = 0; i < n; ++i) {
        const Segment* s = train_segs[order[at + i]];
        xs[i] = s->x.data();
        ys[i] = s->label;
      }
      const Rng step_rng = rng.derive(nn::rng_tag::kDropout).derive(epoch).derive(step);
      const double loss = m.compute_gradients(make_view(xs, ys), step_rng);
      epoch_loss += loss * static_cast<double>(n);
      nn::adam_step(m.params().all_values(), m.params().all_grads(), adam);
    }
    EpochStats st;
    st.train_loss = epoch_loss / static_cast<double>(train_segs.size());
    if (have_val) {
      st.val_loss = mean_inference_loss(m, val_segs);
      st.val_macro_f1 = evaluate_model(m, val_segs, "val").macro_f1;
      if (st.val_loss < best_val - cfg.min_delta) {
        best_val = st.val_loss;
        best_epoch = epoch;
        since_best = 0;
        auto vals = m.params().all_values();
        best_params.assign(vals.begin(), vals.end());
      } else {
        ++since_best;
      }
    }
    out.history.push_back(st);
    if (have_val && since_best >= cfg.patience) break;
  }

  if (have_val && best_epoch > 0) {
    auto vals = m.params().all_values();
    std::copy(best_params.begin(), best_params.end(), vals.begin());
    out.best_epoch = best_epoch;
    out.best_val_loss = best_val;
  }
  return out;
}

} // namespace banet::harness
