#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "banet/nn/matrix.hpp"

namespace banet::data {

enum class Cohort { patient, healthy };
std::string to_string(Cohort c);
Cohort cohort_from_string(std::string_view s);

inline constexpr std::array<std::string_view, 5> kActivityTypes = {
    "sit-to-stand", "stand-to-sit", "bend", "reach-forward", "one-leg-stand"};
bool is_activity_type(std::string_view s);

inline constexpr int kParts = 13;
inline constexpr int kFeatureCols = 2 * kParts;

// [begin, end) in instance frames
struct ActivitySpan {
  std::string type;
  int begin = 0, end = 0;
};

// One subject trial. frames columns: angle_01..angle_13 then
// energy_01..energy_13 (file order). Angles radians in [0, pi]; energies
// (rad/s)^2, non-negative.
struct MovementInstance {
  std::string subject_id;
  std::string instance_id;
  Cohort cohort = Cohort::healthy;
  double sample_rate = 60.0;
  nn::Matrix frames; // T_raw x 26
  std::vector<std::array<std::uint8_t, 4>> raters;
  std::vector<ActivitySpan> activities;
};

// Throws load_error naming the instance and offending row on any invariant
// violation (shape, ranges, finiteness, cohort rule, activity overlap).
void validate_instance(const MovementInstance& inst);

enum class Provenance { original, gauss, dropout };
std::string to_string(Provenance p);

// Model-ready window. x columns are part-blocked: (angle_c, energy_c) pairs.
struct Segment {
  nn::Matrix x; // window x 26
  int label = 0; // 1 = protective
  std::string subject_id;
  std::string instance_id;
  Cohort cohort = Cohort::healthy;
  std::string activity;
  int start = 0;     // window start within its activity block
  int abs_start = 0; // window start within the instance
  int unpadded_len = 0;
  Provenance prov = Provenance::original;
  double prov_param = 0.0; // sigma or p for augmented segments

  // stable identity for per-segment rng streams
  std::uint64_t rng_key() const;
};

} // namespace banet::data
