#include "banet/harness/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "banet/common.hpp"
#include "banet/data/pipeline.hpp"
#include "banet/io_util.hpp"

namespace banet::harness {

using nlohmann::ordered_json;

namespace {

ordered_json fold_to_json(const FoldReport& f) {
  ordered_json j;
  j["test_subject"] = f.test_subject;
  j["test_segments"] = f.test_segments;
  j["accuracy"] = f.accuracy;
  j["macro_f1"] = f.macro_f1;
  j["confusion"] = {{f.confusion[0][0], f.confusion[0][1]},
                    {f.confusion[1][0], f.confusion[1][1]}};
  auto cls = ordered_json::array();
  for (int c = 0; c < 2; ++c) {
    ordered_json e;
    e["class"] = c == 1 ? "protective" : "non-protective";
    e["precision"] = f.per_class[static_cast<size_t>(c)].precision;
    e["recall"] = f.per_class[static_cast<size_t>(c)].recall;
    e["f1"] = f.per_class[static_cast<size_t>(c)].f1;
    cls.push_back(e);
  }
  j["per_class"] = cls;
  return j;
}

} // namespace

ordered_json report_to_json(const ExperimentReport& rep) {
  ordered_json j;
  j["schema_version"] = rep.schema_version;
  j["kind"] = "loso-report";
  ordered_json repro;
  repro["seed"] = rep.config.seed;
  repro["config_hash"] = rep.config_hash;
  repro["dataset_hash"] = rep.dataset_hash;
  repro["kernels"] = rep.kernels;
  j["repro"] = repro;
  j["variant"] = rep.variant;
  j["param_count"] = rep.param_count;
  j["config"] = train_config_to_json(rep.config);
  auto folds = ordered_json::array();
  for (const auto& f : rep.folds) folds.push_back(fold_to_json(f));
  j["folds"] = folds;
  auto training = ordered_json::array();
  for (const auto& t : rep.training) {
    ordered_json e;
    e["test_subject"] = t.test_subject;
    e["epochs"] = t.epochs;
    e["best_epoch"] = t.best_epoch;
    e["best_val_loss"] = t.best_val_loss;
    e["train_segments"] = t.train_segments;
    e["val_segments"] = t.val_segments;
    training.push_back(e);
  }
  j["training"] = training;
  bool all_passed = true;
  auto audit = ordered_json::array();
  for (const auto& a : rep.audit) {
    ordered_json e;
    e["test_subject"] = a.test_subject;
    e["train_subjects"] = a.train_subjects;
    e["normalizer_sources"] = a.normalizer_sources;
    e["augment_sources"] = a.augment_sources;
    e["test_all_original"] = a.test_all_original;
    e["disjoint"] = a.disjoint;
    e["passed"] = a.passed;
    all_passed = all_passed && a.passed;
    audit.push_back(e);
  }
  j["audit"] = {{"passed", all_passed}, {"folds", audit}};
  ordered_json agg;
  agg["mean_accuracy"] = rep.mean_accuracy;
  agg["mean_macro_f1"] = rep.mean_macro_f1;
  agg["pooled_confusion"] = {{rep.pooled[0][0], rep.pooled[0][1]},
                             {rep.pooled[1][0], rep.pooled[1][1]}};
  agg["pooled_accuracy"] = rep.pooled_accuracy;
  agg["pooled_macro_f1"] = rep.pooled_macro_f1;
  j["aggregate"] = agg;
  return j;
}

void write_report(const ExperimentReport& rep, const std::string& path) {
  atomic_write_file(path, report_to_json(rep).dump(2) + "\n");
}

LoadedReport load_report(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw io_error(str_cat(path, ": ", e.what()));
  }
  if (j.value("kind", "") != "loso-report")
    throw io_error(path + ": not a loso report");
  LoadedReport out;
  out.variant = j.value("variant", "");
  for (const auto& f : j.at("folds")) {
    out.subjects.push_back(f.at("test_subject").get<std::string>());
    out.macro_f1.push_back(f.at("macro_f1").get<double>());
    out.accuracy.push_back(f.at("accuracy").get<double>());
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace

void export_attention(const std::vector<AttentionRow>& rows, const ordered_json& repro,
                      const std::string& out_path, const AttentionExportOptions& opt) {
  ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "attention-export";
  j["repro"] = repro;
  auto records = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json e;
    e["subject"] = r.subject;
    e["instance"] = r.instance;
    e["cohort"] = data::to_string(r.cohort);
    e["activity"] = r.activity;
    e["abs_start"] = r.abs_start;
    e["unpadded_len"] = r.unpadded_len;
    e["label"] = r.label;
    e["pred"] = r.pred;
    e["body_summary"] = r.body_summary;
    if (opt.include_temporal && r.temporal.rows() > 0) {
      auto tm = ordered_json::array();
      for (int c = 0; c < r.temporal.rows(); ++c) {
        auto row = ordered_json::array();
        for (int t = 0; t < r.temporal.cols(); ++t) row.push_back(r.temporal(c, t));
        tm.push_back(row);
      }
      e["temporal"] = tm;
    }
    records.push_back(e);
  }
  j["records"] = records;

  // quartile summaries per (cohort, activity, part)
  std::map<std::pair<std::string, std::string>, std::vector<const AttentionRow*>> groups;
  for (const auto& r : rows)
    if (!r.body_summary.empty())
      groups[{data::to_string(r.cohort), r.activity}].push_back(&r);
  auto summaries = ordered_json::array();
  std::string csv = "cohort,activity,part,n,min,q1,median,q3,max\n";
  for (const auto& [key, members] : groups) {
    const size_t parts = members.front()->body_summary.size();
    for (size_t p = 0; p < parts; ++p) {
      std::vector<double> vals;
      vals.reserve(members.size());
      for (const AttentionRow* r : members) vals.push_back(r->body_summary[p]);
      std::sort(vals.begin(), vals.end());
      ordered_json e;
      e["cohort"] = key.first;
      e["activity"] = key.second;
      e["part"] = p + 1;
      e["n"] = vals.size();
      e["min"] = vals.front();
      e["q1"] = quantile_sorted(vals, 0.25);
      e["median"] = quantile_sorted(vals, 0.5);
      e["q3"] = quantile_sorted(vals, 0.75);
      e["max"] = vals.back();
      summaries.push_back(e);
      csv += str_cat(key.first, ",", key.second, ",", p + 1, ",", vals.size(), ",",
                     data::format_double(vals.front()), ",",
                     data::format_double(quantile_sorted(vals, 0.25)), ",",
                     data::format_double(quantile_sorted(vals, 0.5)), ",",
                     data::format_double(quantile_sorted(vals, 0.75)), ",",
                     data::format_double(vals.back()), "\n");
    }
  }
  j["summaries"] = summaries;
  atomic_write_file(out_path, j.dump(2) + "\n");
  if (!opt.summary_csv.empty()) atomic_write_file(opt.summary_csv, csv);
}

} // namespace banet::harness
