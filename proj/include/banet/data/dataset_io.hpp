#pragma once

#include <string>
#include <vector>

#include "banet/data/types.hpp"

namespace banet::data {

// Dataset directory: manifest.json (schema version, sample rate, subject list
// with cohort and instance file references) plus one CSV per instance with
// header  t,angle_01..angle_13,energy_01..energy_13,rater_1..rater_4,activity.
// Energy cells may be "-" (absent); absent entries are computed from the
// angle stream via angular_energy. Activity cells are an activity type or
// "none"; contiguous non-none runs become activity spans.

struct Dataset {
  std::string root;
  double sample_rate = 60.0;
  std::vector<MovementInstance> instances;

  std::vector<std::string> subjects() const; // sorted unique
};

// Loads and validates; throws load_error naming file and row.
Dataset load_dataset(const std::string& root);

// Writes the directory format above; deterministic bytes for fixed inputs.
void write_dataset(const std::string& root, const std::vector<MovementInstance>& instances,
                   double sample_rate);

// Shortest round-trip decimal formatting used for every numeric text output.
std::string format_double(double v);

} // namespace banet::data
