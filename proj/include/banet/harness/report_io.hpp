#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "banet/harness/loso.hpp"

namespace banet::harness {

nlohmann::ordered_json report_to_json(const ExperimentReport& rep);
void write_report(const ExperimentReport& rep, const std::string& path);

// Minimal reader for report comparison: per-fold scores keyed by subject.
struct LoadedReport {
  std::string variant;
  std::vector<std::string> subjects;
  std::vector<double> macro_f1;
  std::vector<double> accuracy;
};
LoadedReport load_report(const std::string& path);

struct AttentionExportOptions {
  bool include_temporal = true;
  std::string summary_csv; // optional extra table for plotting
};

// Per-segment records plus quartile summaries grouped by (cohort, activity,
// part). Quantiles use linear interpolation between order statistics.
void export_attention(const std::vector<AttentionRow>& rows,
                      const nlohmann::ordered_json& repro, const std::string& out_path,
                      const AttentionExportOptions& opt = {});

} // namespace banet::harness
