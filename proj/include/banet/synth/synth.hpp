#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "banet/data/types.hpp"
#include "banet/nn/rng.hpp"

namespace banet::synth {

// Seeded generator of dataset-shaped synthetic recordings with ground-truth
// protective intervals. Patient instances plant a protective signature
// (attenuated oscillation + superimposed tremor + an inserted pause) on a
// fixed per-subject subset of body parts inside randomly placed sub-intervals
// of randomly chosen activities.
struct SynthConfig {
  int n_patients = 6;
  int n_healthy = 6;
  double sample_rate = 60.0;
  double activity_min_s = 10.0;
  double activity_max_s = 30.0;
  int planted_min = 2;
  int planted_max = 4;
  double protective_fraction = 0.4; // of activity samples, per patient instance
  double attenuation = 0.4;         // oscillation amplitude factor inside intervals
  double tremor_hz = 8.0;
  double tremor_amp = 0.08; // radians
  double pause_s = 1.0;     // hesitation hold at interval start
  double rater_flip_p = 0.02;
  int rater_jitter = 12; // boundary shift, samples
  std::uint64_t seed = 7;
};

void validate(const SynthConfig& cfg); // throws usage_error

struct GroundTruthInstance {
  std::string instance_id;
  std::vector<std::uint8_t> mask; // per-sample protective ground truth
  std::vector<int> planted_parts; // 1-based part numbers; empty for healthy
};

struct GroundTruth {
  std::map<std::string, GroundTruthInstance> instances;
};

// Each rater sees the mask with run boundaries shifted independently by
// +-jitter and per-sample flips with probability flip_p. An all-zero mask
// (healthy) yields all-zero raters regardless of noise.
std::vector<std::array<std::uint8_t, 4>> simulate_raters(
    std::span<const std::uint8_t> mask, const nn::Rng& rng, double flip_p, int jitter);

std::pair<data::MovementInstance, GroundTruthInstance> generate_instance(
    const std::string& subject, data::Cohort cohort, std::span<const int> planted_parts,
    const SynthConfig& cfg, const nn::Rng& rng);

// Writes the dataset directory plus a ground_truth.json sidecar (mask
// run-length encoding and planted parts; evaluation-only). Bytes are a pure
// function of the config.
void generate_dataset(const SynthConfig& cfg, const std::string& out_dir);

GroundTruth load_ground_truth(const std::string& dataset_dir);

} // namespace banet::synth
