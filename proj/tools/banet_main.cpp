#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "banet/common.hpp"
#include "banet/data/cache.hpp"
#include "banet/data/dataset_io.hpp"
#include "banet/data/pipeline.hpp"
#include "banet/harness/loso.hpp"
#include "banet/harness/report_io.hpp"
#include "banet/harness/stats.hpp"
#include "banet/harness/train.hpp"
#include "banet/io_util.hpp"
#include "banet/kern/kernels.hpp"
#include "banet/nn/grad_check.hpp"
#include "banet/synth/synth.hpp"
#include "banet/zoo/serialize.hpp"

namespace fs = std::filesystem;
using namespace banet;
using nlohmann::ordered_json;

namespace {

harness::TrainConfig load_train_config(const std::string& path, const std::string& variant,
                                       std::optional<std::uint64_t> seed) {
  harness::TrainConfig cfg;
  if (!path.empty())
    cfg = harness::train_config_from_json(nlohmann::json::parse(read_file(path)));
  if (!variant.empty()) cfg.variant = variant;
  if (seed) cfg.seed = *seed;
  cfg.parsed_variant();
  return cfg;
}

synth::SynthConfig load_synth_config(const std::string& path,
                                     std::optional<std::uint64_t> seed) {
  synth::SynthConfig cfg;
  if (!path.empty()) {
    const auto j = nlohmann::json::parse(read_file(path));
    for (const auto& [key, val] : j.items()) {
      if (key == "n_patients") cfg.n_patients = val.get<int>();
      else if (key == "n_healthy") cfg.n_healthy = val.get<int>();
      else if (key == "sample_rate") cfg.sample_rate = val.get<double>();
      else if (key == "activity_min_s") cfg.activity_min_s = val.get<double>();
      else if (key == "activity_max_s") cfg.activity_max_s = val.get<double>();
      else if (key == "planted_min") cfg.planted_min = val.get<int>();
      else if (key == "planted_max") cfg.planted_max = val.get<int>();
      else if (key == "protective_fraction") cfg.protective_fraction = val.get<double>();
      else if (key == "attenuation") cfg.attenuation = val.get<double>();
      else if (key == "tremor_hz") cfg.tremor_hz = val.get<double>();
      else if (key == "tremor_amp") cfg.tremor_amp = val.get<double>();
      else if (key == "pause_s") cfg.pause_s = val.get<double>();
      else if (key == "rater_flip_p") cfg.rater_flip_p = val.get<double>();
      else if (key == "rater_jitter") cfg.rater_jitter = val.get<int>();
      else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
      else throw usage_error("synth config: unknown key '" + key + "'");
    }
  }
  if (seed) cfg.seed = *seed;
  synth::validate(cfg);
  return cfg;
}

ordered_json synth_config_to_json(const synth::SynthConfig& c) {
  ordered_json j;
  j["n_patients"] = c.n_patients;
  j["n_healthy"] = c.n_healthy;
  j["sample_rate"] = c.sample_rate;
  j["activity_min_s"] = c.activity_min_s;
  j["activity_max_s"] = c.activity_max_s;
  j["planted_min"] = c.planted_min;
  j["planted_max"] = c.planted_max;
  j["protective_fraction"] = c.protective_fraction;
  j["attenuation"] = c.attenuation;
  j["tremor_hz"] = c.tremor_hz;
  j["tremor_amp"] = c.tremor_amp;
  j["pause_s"] = c.pause_s;
  j["rater_flip_p"] = c.rater_flip_p;
  j["rater_jitter"] = c.rater_jitter;
  j["seed"] = c.seed;
  return j;
}

struct NormFile {
  data::Normalizer norm;
};

void save_normalizer(const data::Normalizer& n, const std::string& path) {
  ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "normalizer";
  j["mean"] = n.mean;
  j["stddev"] = n.stddev;
  atomic_write_file(path, j.dump(2) + "\n");
}

data::Normalizer load_normalizer(const std::string& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  if (j.value("kind", "") != "normalizer") throw io_error(path + ": not a normalizer file");
  data::Normalizer n;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("stddev").get<std::vector<double>>();
  if (mean.size() != n.mean.size() || sd.size() != n.stddev.size())
    throw io_error(path + ": wrong normalizer arity");
  std::copy(mean.begin(), mean.end(), n.mean.begin());
  std::copy(sd.begin(), sd.end(), n.stddev.begin());
  return n;
}

// train/evaluate share a single holdout split
struct SingleSplit {
  std::vector<data::Segment> train_pool; // normalized
  std::vector<const data::Segment*> train_ptrs, val_ptrs;
  data::Normalizer norm;
};

SingleSplit make_single_split(const data::Dataset& ds, const std::string& holdout,
                              const harness::TrainConfig& cfg) {
  auto by_subject = harness::segment_dataset(ds, cfg.window);
  if (!holdout.empty() && !by_subject.count(holdout))
    throw usage_error("holdout subject not in dataset: " + holdout);
  SingleSplit sp;
  for (auto& [subj, segs] : by_subject) {
    if (subj == holdout) continue;
    for (auto& s : segs) sp.train_pool.push_back(std::move(s));
  }
  if (sp.train_pool.empty()) throw usage_error("no training subjects left");
  const nn::Rng rng = nn::Rng(cfg.seed).derive(nn::rng_tag::kValSplit);
  // subject-stratified validation split, same policy as run_loso
  std::map<std::string, std::vector<size_t>> by_subj;
  for (size_t i = 0; i < sp.train_pool.size(); ++i)
    by_subj[sp.train_pool[i].subject_id].push_back(i);
  std::vector<char> is_val(sp.train_pool.size(), 0);
  for (auto& [subj, idx] : by_subj) {
    const long long n = static_cast<long long>(idx.size());
    long long k = n >= 2 ? std::llround(cfg.val_fraction * static_cast<double>(n)) : 0;
    k = std::clamp<long long>(k, n >= 2 && cfg.val_fraction > 0 ? 1 : 0, n - 1);
    auto st = rng.derive(subj).stream();
    for (long long i = n - 1; i > 0; --i)
      std::swap(idx[static_cast<size_t>(i)],
                idx[st.next_index(static_cast<std::uint64_t>(i) + 1)]);
    for (long long i = 0; i < k; ++i) is_val[idx[static_cast<size_t>(i)]] = 1;
  }
  std::vector<const data::Segment*> fit_ptrs;
  for (size_t i = 0; i < sp.train_pool.size(); ++i)
    if (!is_val[i]) fit_ptrs.push_back(&sp.train_pool[i]);
  sp.norm = data::Normalizer::fit(
      std::span<const data::Segment* const>(fit_ptrs.data(), fit_ptrs.size()));
  for (auto& s : sp.train_pool) sp.norm.apply(s);
  for (size_t i = 0; i < sp.train_pool.size(); ++i)
    (is_val[i] ? sp.val_ptrs : sp.train_ptrs).push_back(&sp.train_pool[i]);
  return sp;
}

ordered_json repro_block(std::uint64_t seed, const std::string& config_hash,
                         const std::string& dataset_hash) {
  ordered_json j;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["dataset_hash"] = dataset_hash;
  j["kernels"] = kern::active().name;
  return j;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"BANet protective-movement detection: training, evaluation and "
               "synthetic-data experiments"};
  app.require_subcommand(1);

  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "arithmetic lane: auto|scalar|avx2|avx512")
      ->capture_default_str();

  // ---- synth ----
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string sy_config, sy_out;
  std::optional<std::uint64_t> sy_seed;
  c_synth->add_option("--config", sy_config, "SynthConfig JSON file");
  c_synth->add_option("--seed", sy_seed, "override config seed");
  c_synth->add_option("--out", sy_out, "output dataset directory")->required();

  // ---- loso ----
  auto* c_loso = app.add_subcommand("loso", "leave-one-subject-out experiment");
  std::string lo_data, lo_variant, lo_config, lo_out, lo_att, lo_csv, lo_cache;
  std::optional<std::uint64_t> lo_seed;
  int lo_threads = 0;
  bool lo_att_temporal = false;
  c_loso->add_option("--data", lo_data, "dataset directory")->required();
  c_loso->add_option("--variant", lo_variant, "architecture variant");
  c_loso->add_option("--config", lo_config, "TrainConfig JSON file");
  c_loso->add_option("--seed", lo_seed, "override config seed");
  c_loso->add_option("--out", lo_out, "report JSON path")->required();
  c_loso->add_option("--attention-out", lo_att, "pooled test attention export path");
  c_loso->add_flag("--attention-temporal", lo_att_temporal,
                   "include per-segment temporal score matrices in the export");
  c_loso->add_option("--summary-csv", lo_csv, "attention quartile table CSV path");
  c_loso->add_option("--threads", lo_threads, "fold workers (default BANET_THREADS)");
  c_loso->add_option("--cache-dir", lo_cache, "prepared-segment cache directory");

  // ---- train ----
  auto* c_train = app.add_subcommand("train", "train one model on a single split");
  std::string tr_data, tr_variant, tr_config, tr_holdout, tr_out, tr_history;
  std::optional<std::uint64_t> tr_seed;
  c_train->add_option("--data", tr_data, "dataset directory")->required();
  c_train->add_option("--variant", tr_variant, "architecture variant");
  c_train->add_option("--config", tr_config, "TrainConfig JSON file");
  c_train->add_option("--seed", tr_seed, "override config seed");
  c_train->add_option("--holdout", tr_holdout, "subject excluded from training");
  c_train->add_option("--out", tr_out, "model file path")->required();
  c_train->add_option("--history", tr_history, "per-epoch history JSON path");

  // ---- evaluate ----
  auto* c_eval = app.add_subcommand("evaluate", "evaluate a saved model on one subject");
  std::string ev_model, ev_data, ev_subject, ev_out;
  c_eval->add_option("--model", ev_model, "model file")->required();
  c_eval->add_option("--data", ev_data, "dataset directory")->required();
  c_eval->add_option("--subject", ev_subject, "test subject")->required();
  c_eval->add_option("--out", ev_out, "fold report JSON path");

  // ---- paramcount ----
  auto* c_count = app.add_subcommand("paramcount", "print the trainable parameter count");
  std::string pc_variant;
  c_count->add_option("--variant", pc_variant, "architecture variant")->required();

  // ---- gradcheck ----
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  std::string gc_variant, gc_scale = "small";
  double gc_h = 2e-4, gc_tol = 1e-4;
  std::uint64_t gc_seed = 61;
  c_grad->add_option("--variant", gc_variant, "architecture variant")->required();
  c_grad->add_option("--scale", gc_scale, "small (T=12,K=4) or full")
      ->check(CLI::IsMember({"small", "full"}))
      ->capture_default_str();
  c_grad->add_option("--step", gc_h, "central-difference step h")->capture_default_str();
  c_grad->add_option("--tol", gc_tol, "max relative error accepted")->capture_default_str();
  c_grad->add_option("--seed", gc_seed, "probe seed")->capture_default_str();

  // ---- attention ----
  auto* c_att = app.add_subcommand("attention", "export attention scores of a saved model");
  std::string at_model, at_data, at_subject, at_out, at_csv;
  bool at_no_temporal = false;
  c_att->add_option("--model", at_model, "model file")->required();
  c_att->add_option("--data", at_data, "dataset directory")->required();
  c_att->add_option("--subject", at_subject, "restrict to one subject");
  c_att->add_option("--out", at_out, "export JSON path")->required();
  c_att->add_option("--summary-csv", at_csv, "quartile table CSV path");
  c_att->add_flag("--no-temporal", at_no_temporal, "omit temporal score matrices");

  // ---- compare ----
  auto* c_cmp = app.add_subcommand("compare", "paired t-test between two loso reports");
  std::string cm_a, cm_b, cm_metric = "macro_f1", cm_out;
  int cm_bonf = 1;
  c_cmp->add_option("--a", cm_a, "first report")->required();
  c_cmp->add_option("--b", cm_b, "second report")->required();
  c_cmp->add_option("--metric", cm_metric, "macro_f1 or accuracy")
      ->check(CLI::IsMember({"macro_f1", "accuracy"}))
      ->capture_default_str();
  c_cmp->add_option("--bonferroni", cm_bonf, "number of comparisons for correction")
      ->capture_default_str();
  c_cmp->add_option("--out", cm_out, "result JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!kern::select(kernels))
      throw usage_error("kernel lane not available on this machine: " + kernels);

    if (*c_synth) {
      const auto cfg = load_synth_config(sy_config, sy_seed);
      synth::generate_dataset(cfg, sy_out);
      const auto echo = synth_config_to_json(cfg);
      ordered_json meta;
      meta["schema_version"] = 1;
      meta["kind"] = "synth-repro";
      meta["config"] = echo;
      meta["config_hash"] = hash_hex(fnv1a64(echo.dump()));
      meta["dataset_hash"] = hash_directory(sy_out);
      meta["kernels"] = kern::active().name;
      atomic_write_file((fs::path(sy_out) / "synth_repro.json").string(),
                        meta.dump(2) + "\n");
      std::printf("wrote %s (%d subjects)\n", sy_out.c_str(),
                  cfg.n_patients + cfg.n_healthy);
      return 0;
    }

    if (*c_loso) {
      const auto cfg = load_train_config(lo_config, lo_variant, lo_seed);
      const auto ds = data::load_dataset(lo_data);
      harness::LosoOptions opt;
      opt.threads = lo_threads;
      opt.collect_attention = !lo_att.empty();
      opt.attention_temporal = lo_att_temporal;
      data::SegmentsBySubject cached;
      if (!lo_cache.empty()) {
        fs::create_directories(lo_cache);
        const std::string key = data::cache_file_name(
            hash_directory(lo_data), cfg.window, std::max(1, cfg.window / 4), cfg.seed);
        const std::string cpath = (fs::path(lo_cache) / key).string();
        if (!data::load_segment_cache(cpath, cached)) {
          cached = harness::segment_dataset(ds, cfg.window);
          data::save_segment_cache(cpath, cached);
        }
        opt.pre_segmented = &cached;
      }
      std::vector<harness::AttentionRow> rows;
      const auto rep = harness::run_loso(ds, cfg, opt,
                                         opt.collect_attention ? &rows : nullptr);
      harness::write_report(rep, lo_out);
      if (!lo_att.empty()) {
        harness::AttentionExportOptions aopt;
        aopt.include_temporal = lo_att_temporal;
        aopt.summary_csv = lo_csv;
        ordered_json repro = repro_block(cfg.seed, rep.config_hash, rep.dataset_hash);
        harness::export_attention(rows, repro, lo_att, aopt);
      }
      std::printf("%s: mean accuracy %.4f, mean macro-F1 %.4f over %zu folds -> %s\n",
                  rep.variant.c_str(), rep.mean_accuracy, rep.mean_macro_f1,
                  rep.folds.size(), lo_out.c_str());
      return 0;
    }

    if (*c_train) {
      const auto cfg = load_train_config(tr_config, tr_variant, tr_seed);
      const auto ds = data::load_dataset(tr_data);
      auto sp = make_single_split(ds, tr_holdout, cfg);
      std::vector<data::Segment> train_final;
      if (cfg.augment) {
        std::vector<data::Segment> orig;
        for (const auto* p : sp.train_ptrs) orig.push_back(*p);
        train_final = data::expand_training_set(
            std::span<const data::Segment>(orig.data(), orig.size()),
            nn::Rng(cfg.seed).derive(nn::rng_tag::kFold));
      } else {
        for (const auto* p : sp.train_ptrs) train_final.push_back(*p);
      }
      std::vector<const data::Segment*> tp;
      for (const auto& s : train_final) tp.push_back(&s);
      zoo::Model model(cfg.model_spec(), cfg.seed);
      const auto res = harness::train(
          model, std::span<const data::Segment* const>(tp.data(), tp.size()),
          std::span<const data::Segment* const>(sp.val_ptrs.data(), sp.val_ptrs.size()),
          cfg, nn::Rng(cfg.seed).derive(nn::rng_tag::kFold));
      zoo::save_model(model, tr_out);
      save_normalizer(sp.norm, tr_out + ".norm.json");
      if (!tr_history.empty()) {
        ordered_json h;
        h["schema_version"] = 1;
        h["kind"] = "train-history";
        h["repro"] = repro_block(cfg.seed,
                                 hash_hex(fnv1a64(harness::train_config_to_json(cfg).dump())),
                                 hash_directory(tr_data));
        h["best_epoch"] = res.best_epoch;
        h["best_val_loss"] = res.best_val_loss;
        auto arr = ordered_json::array();
        for (const auto& e : res.history)
          arr.push_back({{"train_loss", e.train_loss},
                         {"val_loss", e.val_loss},
                         {"val_macro_f1", e.val_macro_f1}});
        h["epochs"] = arr;
        atomic_write_file(tr_history, h.dump(2) + "\n");
      }
      std::printf("trained %s for %zu epochs (best %d) -> %s\n", cfg.variant.c_str(),
                  res.history.size(), res.best_epoch, tr_out.c_str());
      return 0;
    }

    if (*c_eval) {
      auto model = zoo::load_model(ev_model);
      const auto norm = load_normalizer(ev_model + ".norm.json");
      const auto ds = data::load_dataset(ev_data);
      auto by_subject = harness::segment_dataset(ds, model.spec().window);
      if (!by_subject.count(ev_subject))
        throw usage_error("subject not in dataset: " + ev_subject);
      auto segs = by_subject.at(ev_subject);
      for (auto& s : segs) norm.apply(s);
      std::vector<const data::Segment*> ptrs;
      for (const auto& s : segs) ptrs.push_back(&s);
      const auto rep = harness::evaluate_model(
          model, std::span<const data::Segment* const>(ptrs.data(), ptrs.size()),
          ev_subject);
      std::printf("%s on %s: accuracy %.4f, macro-F1 %.4f (%lld segments)\n",
                  to_string(model.spec().variant).c_str(), ev_subject.c_str(),
                  rep.accuracy, rep.macro_f1, rep.test_segments);
      if (!ev_out.empty()) {
        ordered_json j;
        j["schema_version"] = 1;
        j["kind"] = "fold-report";
        j["test_subject"] = rep.test_subject;
        j["accuracy"] = rep.accuracy;
        j["macro_f1"] = rep.macro_f1;
        j["confusion"] = {{rep.confusion[0][0], rep.confusion[0][1]},
                          {rep.confusion[1][0], rep.confusion[1][1]}};
        j["repro"] = repro_block(model.seed(), "", hash_directory(ev_data));
        atomic_write_file(ev_out, j.dump(2) + "\n");
      }
      return 0;
    }

    if (*c_count) {
      zoo::ModelSpec spec;
      spec.variant = zoo::variant_from_string(pc_variant);
      std::printf("%zu\n", zoo::Model(spec, 0).param_count());
      return 0;
    }

    if (*c_grad) {
      zoo::ModelSpec spec;
      spec.variant = zoo::variant_from_string(gc_variant);
      if (gc_scale == "small") {
        spec.window = 12;
        spec.hidden = 4;
      }
      zoo::Model model(spec, gc_seed);
      const nn::Rng rng(gc_seed);
      std::vector<std::vector<double>> segs;
      std::vector<const double*> xs;
      std::vector<int> ys;
      for (int i = 0; i < 2; ++i) {
        std::vector<double> seg(static_cast<size_t>(spec.window) * spec.input_dim());
        const nn::Rng sr = rng.derive(10 + i);
        for (size_t j = 0; j < seg.size(); ++j) seg[j] = 2.0 * sr.unit(j) - 1.0;
        segs.push_back(std::move(seg));
        ys.push_back(i % 2);
      }
      for (auto& s : segs) xs.push_back(s.data());
      const zoo::BatchView batch{std::span<const double* const>(xs.data(), xs.size()),
                                 std::span<const int>(ys.data(), ys.size())};
      const nn::Rng drop_rng = nn::Rng(gc_seed).derive(99);
      auto res = nn::grad_check(
          model.params(), [&] { model.compute_gradients(batch, drop_rng); },
          [&] { return model.mean_loss(batch, nn::Mode::train, drop_rng); }, gc_h);
      std::printf("max_rel_err %.6e at %s (analytic %.6e, numeric %.6e, h=%g)\n",
                  res.max_rel_err, res.worst_param.c_str(), res.analytic, res.numeric,
                  gc_h);
      if (res.max_rel_err <= gc_tol) {
        std::printf("PASS (tol %g)\n", gc_tol);
        return 0;
      }
      std::printf("FAIL (tol %g)\n", gc_tol);
      return 2;
    }

    if (*c_att) {
      auto model = zoo::load_model(at_model);
      const auto norm = load_normalizer(at_model + ".norm.json");
      const auto ds = data::load_dataset(at_data);
      auto by_subject = harness::segment_dataset(ds, model.spec().window);
      std::vector<harness::AttentionRow> rows;
      for (auto& [subj, segs] : by_subject) {
        if (!at_subject.empty() && subj != at_subject) continue;
        for (auto& s : segs) norm.apply(s);
        std::vector<const data::Segment*> ptrs;
        for (const auto& s : segs) ptrs.push_back(&s);
        std::vector<zoo::AttentionRecord> att;
        std::vector<int> preds;
        harness::evaluate_model(
            model, std::span<const data::Segment* const>(ptrs.data(), ptrs.size()),
            subj, &att, &preds);
        for (size_t i = 0; i < segs.size(); ++i) {
          harness::AttentionRow row;
          row.subject = segs[i].subject_id;
          row.instance = segs[i].instance_id;
          row.activity = segs[i].activity;
          row.cohort = segs[i].cohort;
          row.label = segs[i].label;
          row.pred = preds[i];
          row.abs_start = segs[i].abs_start;
          row.unpadded_len = segs[i].unpadded_len;
          row.body_summary = att[i].body_summary;
          if (!at_no_temporal) row.temporal = att[i].temporal;
          rows.push_back(std::move(row));
        }
      }
      std::sort(rows.begin(), rows.end(),
                [](const harness::AttentionRow& a, const harness::AttentionRow& b) {
                  return std::tie(a.subject, a.instance, a.abs_start, a.activity) <
                         std::tie(b.subject, b.instance, b.abs_start, b.activity);
                });
      harness::AttentionExportOptions aopt;
      aopt.include_temporal = !at_no_temporal;
      aopt.summary_csv = at_csv;
      harness::export_attention(rows, repro_block(model.seed(), "", hash_directory(at_data)),
                                at_out, aopt);
      std::printf("exported %zu attention records -> %s\n", rows.size(), at_out.c_str());
      return 0;
    }

    if (*c_cmp) {
      const auto ra = harness::load_report(cm_a);
      const auto rb = harness::load_report(cm_b);
      if (ra.subjects != rb.subjects)
        throw usage_error("reports cover different fold subjects; cannot pair");
      const auto& va = cm_metric == "accuracy" ? ra.accuracy : ra.macro_f1;
      const auto& vb = cm_metric == "accuracy" ? rb.accuracy : rb.macro_f1;
      const auto res = harness::paired_ttest(va, vb);
      const double p_adj = harness::bonferroni(res.p, cm_bonf);
      std::printf("paired t-test on %s (%s vs %s): t=%.4f df=%d p=%.6g", cm_metric.c_str(),
                  ra.variant.c_str(), rb.variant.c_str(), res.t, res.df, res.p);
      if (cm_bonf > 1) std::printf(" bonferroni(%d)=%.6g", cm_bonf, p_adj);
      if (res.degenerate) std::printf(" [degenerate: zero-variance differences]");
      std::printf("\n");
      if (!cm_out.empty()) {
        ordered_json j;
        j["schema_version"] = 1;
        j["kind"] = "compare";
        j["metric"] = cm_metric;
        j["a"] = ra.variant;
        j["b"] = rb.variant;
        j["t"] = res.t;
        j["df"] = res.df;
        j["p"] = res.p;
        j["bonferroni_m"] = cm_bonf;
        j["p_adjusted"] = p_adj;
        j["degenerate"] = res.degenerate;
        atomic_write_file(cm_out, j.dump(2) + "\n");
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
