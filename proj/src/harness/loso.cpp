#include "banet/harness/loso.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

#include "banet/common.hpp"
#include "banet/data/pipeline.hpp"
#include "banet/io_util.hpp"
#include "banet/kern/kernels.hpp"

namespace banet::harness {

using data::Segment;
using nn::Rng;

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BANET_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

std::vector<std::string> sorted_unique_subjects(const std::vector<const Segment*>& segs) {
  std::vector<std::string> out;
  for (const Segment* s : segs) out.push_back(s->subject_id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct FoldOutcome {
  FoldReport report;
  FoldTrainInfo info;
  AuditFold audit;
  std::vector<AttentionRow> attention;
};

} // namespace

data::SegmentsBySubject segment_dataset(const data::Dataset& ds, int window) {
  const int stride = std::max(1, window / 4); // 75% overlap
  data::SegmentsBySubject by_subject;
  for (const auto& inst : ds.instances) {
    auto segs = data::segment_instance(inst, window, stride);
    auto& dst = by_subject[inst.subject_id];
    for (auto& s : segs) dst.push_back(std::move(s));
  }
  return by_subject;
}

ExperimentReport run_loso(const data::Dataset& ds, const TrainConfig& cfg,
                          const LosoOptions& opt,
                          std::vector<AttentionRow>* attention_out) {
  const data::SegmentsBySubject by_subject =
      opt.pre_segmented ? *opt.pre_segmented : segment_dataset(ds, cfg.window);
  const auto subjects = ds.subjects();
  const auto folds = data::loso_folds(subjects);

  const bool want_attention =
      (opt.collect_attention || attention_out) &&
      zoo::variant_has_attention(cfg.parsed_variant());

  std::vector<FoldOutcome> outcomes(folds.size());
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (true) {
      const size_t fi = next.fetch_add(1);
      if (fi >= folds.size()) return;
      try {
        const auto& fold = folds[fi];
        const Rng fold_rng = Rng(cfg.seed).derive(nn::rng_tag::kFold).derive(fold.test_subject);

        // copies: per-fold normalization must not touch the shared originals
        std::vector<Segment> test_segs = by_subject.at(fold.test_subject);
        std::vector<Segment> train_pool;
        for (const auto& subj : fold.train_subjects)
          for (const auto& s : by_subject.at(subj)) train_pool.push_back(s);

        // subject-stratified validation split
        std::vector<char> is_val(train_pool.size(), 0);
        std::map<std::string, std::vector<size_t>> idx_by_subj;
        for (size_t i = 0; i < train_pool.size(); ++i)
          idx_by_subj[train_pool[i].subject_id].push_back(i);
        for (auto& [subj, idx] : idx_by_subj) {
          std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            const Segment& sa = train_pool[a];
            const Segment& sb = train_pool[b];
            return std::tie(sa.instance_id, sa.abs_start, sa.activity) <
                   std::tie(sb.instance_id, sb.abs_start, sb.activity);
          });
          const long long n = static_cast<long long>(idx.size());
          long long k = n >= 2 ? std::llround(cfg.val_fraction * static_cast<double>(n)) : 0;
          k = std::clamp<long long>(k, n >= 2 && cfg.val_fraction > 0 ? 1 : 0, n - 1);
          auto st = fold_rng.derive(nn::rng_tag::kValSplit).derive(subj).stream();
          for (long long i = n - 1; i > 0; --i)
            std::swap(idx[static_cast<size_t>(i)],
                      idx[st.next_index(static_cast<std::uint64_t>(i) + 1)]);
          for (long long i = 0; i < k; ++i) is_val[idx[static_cast<size_t>(i)]] = 1;
        }

        std::vector<const Segment*> train_ptrs, val_ptrs;
        for (size_t i = 0; i < train_pool.size(); ++i)
          (is_val[i] ? val_ptrs : train_ptrs).push_back(&train_pool[i]);

        const auto norm = data::Normalizer::fit(
            std::span<const Segment* const>(train_ptrs.data(), train_ptrs.size()));
        for (auto& s : train_pool) norm.apply(s);
        for (auto& s : test_segs) norm.apply(s);

        std::vector<Segment> train_final;
        if (cfg.augment) {
          std::vector<Segment> train_orig;
          for (const Segment* p : train_ptrs) train_orig.push_back(*p);
          train_final = data::expand_training_set(
              std::span<const Segment>(train_orig.data(), train_orig.size()), fold_rng);
        } else {
          for (const Segment* p : train_ptrs) train_final.push_back(*p);
        }
        std::vector<const Segment*> train_final_ptrs;
        for (const auto& s : train_final) train_final_ptrs.push_back(&s);

        zoo::Model model(cfg.model_spec(), fold_rng.derive("model-seed").key());
        const TrainResult tr = train(
            model,
            std::span<const Segment* const>(train_final_ptrs.data(), train_final_ptrs.size()),
            std::span<const Segment* const>(val_ptrs.data(), val_ptrs.size()), cfg,
            fold_rng);

        std::vector<const Segment*> test_ptrs;
        for (const auto& s : test_segs) test_ptrs.push_back(&s);
        std::vector<zoo::AttentionRecord> att;
        std::vector<int> preds;
        FoldOutcome& oc = outcomes[fi];
        oc.report = evaluate_model(
            model, std::span<const Segment* const>(test_ptrs.data(), test_ptrs.size()),
            fold.test_subject, want_attention ? &att : nullptr, &preds);

        oc.info.test_subject = fold.test_subject;
        oc.info.epochs = static_cast<int>(tr.history.size());
        oc.info.best_epoch = tr.best_epoch;
        oc.info.best_val_loss = tr.best_val_loss;
        oc.info.train_segments = static_cast<long long>(train_final.size());
        oc.info.val_segments = static_cast<long long>(val_ptrs.size());

        AuditFold& au = oc.audit;
        au.test_subject = fold.test_subject;
        au.train_subjects = fold.train_subjects;
        au.normalizer_sources = sorted_unique_subjects(train_ptrs);
        au.augment_sources = cfg.augment ? sorted_unique_subjects(train_ptrs)
                                         : std::vector<std::string>{};
        au.test_all_original = std::all_of(
            test_segs.begin(), test_segs.end(),
            [](const Segment& s) { return s.prov == data::Provenance::original; });
        auto contains = [](const std::vector<std::string>& v, const std::string& x) {
          return std::find(v.begin(), v.end(), x) != v.end();
        };
        au.disjoint = !contains(au.train_subjects, fold.test_subject) &&
                      !contains(au.normalizer_sources, fold.test_subject) &&
                      !contains(au.augment_sources, fold.test_subject);
        au.passed = au.disjoint && au.test_all_original;

        if (want_attention) {
          for (size_t i = 0; i < test_segs.size(); ++i) {
            AttentionRow row;
            const Segment& s = test_segs[i];
            row.subject = s.subject_id;
            row.instance = s.instance_id;
            row.activity = s.activity;
            row.cohort = s.cohort;
            row.label = s.label;
            row.pred = preds[i];
            row.abs_start = s.abs_start;
            row.unpadded_len = s.unpadded_len;
            row.body_summary = att[i].body_summary;
            if (opt.attention_temporal) row.temporal = att[i].temporal;
            oc.attention.push_back(std::move(row));
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int nthreads = std::max(1, std::min<int>(resolve_threads(opt.threads),
                                                 static_cast<int>(folds.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentReport rep;
  rep.variant = cfg.variant;
  rep.config = cfg;
  rep.dataset_hash = hash_directory(ds.root);
  rep.config_hash = hash_hex(fnv1a64(train_config_to_json(cfg).dump()));
  rep.kernels = kern::active().name;
  rep.param_count = zoo::Model(cfg.model_spec(), 0).param_count();
  for (auto& oc : outcomes) {
    rep.folds.push_back(oc.report);
    rep.training.push_back(oc.info);
    rep.audit.push_back(oc.audit);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) rep.pooled[a][b] += oc.report.confusion[a][b];
    if (attention_out)
      for (auto& row : oc.attention) attention_out->push_back(std::move(row));
  }
  for (const auto& f : rep.folds) {
    rep.mean_accuracy += f.accuracy / static_cast<double>(rep.folds.size());
    rep.mean_macro_f1 += f.macro_f1 / static_cast<double>(rep.folds.size());
  }
  const FoldReport pooled_rep = report_from_confusion(rep.pooled, "pooled");
  rep.pooled_accuracy = pooled_rep.accuracy;
  rep.pooled_macro_f1 = pooled_rep.macro_f1;
  if (attention_out)
    std::sort(attention_out->begin(), attention_out->end(),
              [](const AttentionRow& a, const AttentionRow& b) {
                return std::tie(a.subject, a.instance, a.abs_start, a.activity) <
                       std::tie(b.subject, b.instance, b.abs_start, b.activity);
              });
  return rep;
}

} // namespace banet::harness
