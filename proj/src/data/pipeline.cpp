#include "banet/data/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "banet/common.hpp"
#include "banet/io_util.hpp"

namespace banet::data {

std::string to_string(Cohort c) {
  return c == Cohort::patient ? "patient" : "healthy";
}

Cohort cohort_from_string(std::string_view s) {
  if (s == "patient") return Cohort::patient;
  if (s == "healthy") return Cohort::healthy;
  throw load_error(str_cat("unknown cohort: ", s));
}

bool is_activity_type(std::string_view s) {
  for (auto t : kActivityTypes)
    if (t == s) return true;
  return false;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::gauss: return "gauss";
    case Provenance::dropout: return "dropout";
  }
  return "?";
}

std::uint64_t Segment::rng_key() const {
  std::uint64_t h = fnv1a64(subject_id);
  h = fnv1a64(instance_id, h);
  h = fnv1a64(activity, h);
  h = fnv1a64(std::to_string(abs_start), h);
  return h;
}

void validate_instance(const MovementInstance& inst) {
  const std::string& id = inst.instance_id;
  const int T = inst.frames.rows();
  if (inst.frames.cols() != kFeatureCols)
    throw load_error(str_cat(id, ": expected ", kFeatureCols, " feature columns, got ",
                             inst.frames.cols()));
  if (static_cast<int>(inst.raters.size()) != T)
    throw load_error(str_cat(id, ": rater rows (", inst.raters.size(),
                             ") do not match frame rows (", T, ")"));
  if (inst.sample_rate <= 0) throw load_error(id + ": non-positive sample rate");
  constexpr double kPi = 3.14159265358979323846;
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < kFeatureCols; ++c) {
      const double v = inst.frames(t, c);
      if (!std::isfinite(v))
        throw load_error(str_cat(id, " row ", t, ": non-finite value in column ", c));
      if (c < kParts && (v < -1e-9 || v > kPi + 1e-9))
        throw load_error(str_cat(id, " row ", t, ": angle_", c + 1, " = ", v,
                                 " outside [0, pi]"));
      if (c >= kParts && v < -1e-12)
        throw load_error(str_cat(id, " row ", t, ": negative energy_", c - kParts + 1));
    }
    for (int r = 0; r < 4; ++r)
      if (inst.raters[t][r] > 1)
        throw load_error(str_cat(id, " row ", t, ": rater flag not binary"));
    if (inst.cohort == Cohort::healthy)
      for (int r = 0; r < 4; ++r)
        if (inst.raters[t][r] != 0)
          throw load_error(str_cat(id, " row ", t,
                                   ": healthy instance carries a protective rating"));
  }
  std::vector<ActivitySpan> spans = inst.activities;
  std::sort(spans.begin(), spans.end(),
            [](const ActivitySpan& a, const ActivitySpan& b) { return a.begin < b.begin; });
  int prev_end = 0;
  for (const auto& a : spans) {
    if (!is_activity_type(a.type))
      throw load_error(str_cat(id, ": unknown activity type '", a.type, "'"));
    if (a.begin < 0 || a.end > T || a.begin >= a.end)
      throw load_error(str_cat(id, ": activity '", a.type, "' [", a.begin, ",", a.end,
                               ") out of bounds"));
    if (a.begin < prev_end)
      throw load_error(str_cat(id, ": overlapping activities at row ", a.begin));
    prev_end = a.end;
  }
}

double joint_angle(const std::array<double, 3>& a, const std::array<double, 3>& b,
                   const std::array<double, 3>& c) {
  double u[3], v[3];
  for (int i = 0; i < 3; ++i) {
    u[i] = a[i] - b[i];
    v[i] = c[i] - b[i];
  }
  const double nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  const double nv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (nu < 1e-12 || nv < 1e-12)
    throw usage_error("joint_angle: zero-length limb vector");
  double cosang = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv);
  cosang = std::clamp(cosang, -1.0, 1.0);
  return std::acos(cosang);
}

std::vector<double> angular_energy(std::span<const double> theta, double fs) {
  std::vector<double> e(theta.size(), 0.0);
  for (size_t t = 1; t < theta.size(); ++t) {
    const double w = (theta[t] - theta[t - 1]) * fs;
    e[t] = w * w;
  }
  return e;
}

int label_segment(std::span<const std::array<std::uint8_t, 4>> rater_rows,
                  int unpadded_len) {
  if (unpadded_len < 1 || static_cast<size_t>(unpadded_len) > rater_rows.size())
    throw usage_error("label_segment: bad unpadded length");
  int protective = 0;
  for (int t = 0; t < unpadded_len; ++t) {
    const auto& r = rater_rows[static_cast<size_t>(t)];
    const int votes = r[0] + r[1] + r[2] + r[3];
    if (votes >= 2) ++protective;
  }
  return 2 * protective >= unpadded_len ? 1 : 0;
}

std::vector<Segment> segment_instance(const MovementInstance& inst, int window,
                                      int stride) {
  if (window <= 0 || stride <= 0) throw usage_error("segment_instance: bad window/stride");
  std::vector<Segment> out;
  const int half = window / 2;
  for (const auto& block : inst.activities) {
    const int len = block.end - block.begin;
    std::vector<int> starts;
    if (len < half) {
      starts.push_back(0);
    } else {
      for (int start = 0; start < len; start += stride)
        if (std::min(window, len - start) >= half) starts.push_back(start);
    }
    for (int start : starts) {
      Segment seg;
      seg.x = nn::Matrix(window, kFeatureCols);
      seg.unpadded_len = std::min(window, len - start);
      seg.subject_id = inst.subject_id;
      seg.instance_id = inst.instance_id;
      seg.cohort = inst.cohort;
      seg.activity = block.type;
      seg.start = start;
      seg.abs_start = block.begin + start;
      for (int t = 0; t < seg.unpadded_len; ++t) {
        const int src = block.begin + start + t;
        for (int c = 0; c < kParts; ++c) {
          seg.x(t, 2 * c) = inst.frames(src, c);            // angle
          seg.x(t, 2 * c + 1) = inst.frames(src, kParts + c); // energy
        }
      }
      seg.label = label_segment(
          std::span<const std::array<std::uint8_t, 4>>(
              inst.raters.data() + seg.abs_start, static_cast<size_t>(seg.unpadded_len)),
          seg.unpadded_len);
      out.push_back(std::move(seg));
    }
  }
  return out;
}

Normalizer Normalizer::fit(std::span<const Segment* const> segments) {
  long long n = 0;
  Normalizer nm{};
  for (const Segment* s : segments) n += s->unpadded_len;
  if (n == 0) throw usage_error("Normalizer::fit: no unpadded samples");
  for (const Segment* s : segments)
    for (int t = 0; t < s->unpadded_len; ++t)
      for (int c = 0; c < kFeatureCols; ++c) nm.mean[c] += s->x(t, c);
  for (int c = 0; c < kFeatureCols; ++c) nm.mean[c] /= static_cast<double>(n);
  // a bitwise-constant column must normalize to exactly zero despite the
  // floored deviation, so pin its mean to the constant
  for (int c = 0; c < kFeatureCols; ++c) {
    const double first = (*segments.begin())->x(0, c);
    bool constant = true;
    for (const Segment* s : segments) {
      for (int t = 0; constant && t < s->unpadded_len; ++t)
        constant = s->x(t, c) == first;
      if (!constant) break;
    }
    if (constant) nm.mean[c] = first;
  }
  for (const Segment* s : segments)
    for (int t = 0; t < s->unpadded_len; ++t)
      for (int c = 0; c < kFeatureCols; ++c) {
        const double d = s->x(t, c) - nm.mean[c];
        nm.stddev[c] += d * d;
      }
  for (int c = 0; c < kFeatureCols; ++c)
    nm.stddev[c] = std::max(std::sqrt(nm.stddev[c] / static_cast<double>(n)), 1e-8);
  return nm;
}

void Normalizer::apply(Segment& s) const {
  for (int t = 0; t < s.unpadded_len; ++t)
    for (int c = 0; c < kFeatureCols; ++c)
      s.x(t, c) = (s.x(t, c) - mean[c]) / stddev[c];
}

void Normalizer::invert(Segment& s) const {
  for (int t = 0; t < s.unpadded_len; ++t)
    for (int c = 0; c < kFeatureCols; ++c) s.x(t, c) = s.x(t, c) * stddev[c] + mean[c];
}

Segment augment_gauss(const Segment& s, double sigma, const nn::Rng& rng) {
  if (sigma < 0.0) throw usage_error("augment_gauss: negative sigma");
  Segment out = s;
  out.prov = Provenance::gauss;
  out.prov_param = sigma;
  if (sigma == 0.0) return out;
  auto stream = rng.stream();
  for (int t = 0; t < s.unpadded_len; ++t)
    for (int c = 0; c < kFeatureCols; ++c)
      out.x(t, c) += sigma * stream.next_gauss();
  return out;
}

Segment augment_dropout(const Segment& s, double p, const nn::Rng& rng) {
  if (p < 0.0 || p > 1.0) throw usage_error("augment_dropout: p outside [0,1]");
  Segment out = s;
  out.prov = Provenance::dropout;
  out.prov_param = p;
  if (p == 0.0) return out;
  auto stream = rng.stream();
  for (int t = 0; t < s.unpadded_len; ++t)
    for (int c = 0; c < kParts; ++c)
      if (stream.next_unit() < p) {
        out.x(t, 2 * c) = 0.0; // both feature columns of the part
        out.x(t, 2 * c + 1) = 0.0;
      }
  return out;
}

std::vector<Segment> expand_training_set(std::span<const Segment> originals,
                                         const nn::Rng& rng) {
  std::vector<Segment> out;
  out.reserve(originals.size() * 7);
  for (const Segment& s : originals) {
    const nn::Rng seg_rng = rng.derive(nn::rng_tag::kAugment).derive(s.rng_key());
    out.push_back(s);
    for (size_t i = 0; i < kAugmentLevels.size(); ++i)
      out.push_back(augment_gauss(s, kAugmentLevels[i], seg_rng.derive(10 + i)));
    for (size_t i = 0; i < kAugmentLevels.size(); ++i)
      out.push_back(augment_dropout(s, kAugmentLevels[i], seg_rng.derive(20 + i)));
  }
  return out;
}

std::vector<Fold> loso_folds(std::span<const std::string> subjects) {
  std::set<std::string> uniq(subjects.begin(), subjects.end());
  if (uniq.size() < 2) throw usage_error("loso_folds: need at least two subjects");
  std::vector<Fold> folds;
  for (const auto& test : uniq) {
    Fold f;
    f.test_subject = test;
    for (const auto& s : uniq)
      if (s != test) f.train_subjects.push_back(s);
    folds.push_back(std::move(f));
  }
  return folds;
}

} // namespace banet::data
