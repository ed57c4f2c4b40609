#pragma once

#include <array>
#include <span>
#include <vector>

#include "banet/data/types.hpp"
#include "banet/nn/rng.hpp"

namespace banet::data {

// Angle at vertex b formed by limb vectors (a-b) and (c-b), radians in
// [0, pi]. Invariant under global rotation/translation. Throws usage_error on
// zero-length limb vectors.
double joint_angle(const std::array<double, 3>& a, const std::array<double, 3>& b,
                   const std::array<double, 3>& c);

// e_t = ((theta_t - theta_{t-1}) * fs)^2, e_0 = 0.
std::vector<double> angular_energy(std::span<const double> theta, double fs);

// Sliding windows per activity block: starts at k*stride while start < block
// length, emitted when the unpadded length is at least window/2; blocks
// shorter than window/2 yield one padded window at start 0. Tail rows are
// zero-filled. Labels via label_segment.
std::vector<Segment> segment_instance(const MovementInstance& inst, int window = 180,
                                      int stride = 45);

// A sample is protective when >= 2 of 4 raters flag it; the segment is
// protective when protective samples / unpadded_len >= 0.5 (padding excluded).
int label_segment(std::span<const std::array<std::uint8_t, 4>> rater_rows,
                  int unpadded_len);

// Per-column z-score fitted on unpadded rows only; stddev floored at 1e-8.
struct Normalizer {
  std::array<double, kFeatureCols> mean{};
  std::array<double, kFeatureCols> stddev{};

  static Normalizer fit(std::span<const Segment* const> segments);
  void apply(Segment& s) const;  // padded rows stay exactly zero
  void invert(Segment& s) const;
};

// Augmentations operate on normalized segments and touch unpadded entries
// only; label/subject/activity/unpadded_len are preserved.
Segment augment_gauss(const Segment& s, double sigma, const nn::Rng& rng);
// Zeroes both feature columns of a (timestep, part) pair with probability p.
Segment augment_dropout(const Segment& s, double p, const nn::Rng& rng);

inline constexpr std::array<double, 3> kAugmentLevels = {0.05, 0.10, 0.15};

// 1 original + 3 gauss + 3 dropout per input segment (exactly 7x). Each
// segment draws from a stream derived from its identity, so the expansion is
// order-independent and parallel-safe.
std::vector<Segment> expand_training_set(std::span<const Segment> originals,
                                         const nn::Rng& rng);

struct Fold {
  std::string test_subject;
  std::vector<std::string> train_subjects;
};

// One fold per distinct subject, sorted by subject id. Throws usage_error
// when fewer than two subjects are present.
std::vector<Fold> loso_folds(std::span<const std::string> subjects);

} // namespace banet::data
