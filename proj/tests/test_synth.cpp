#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "banet/common.hpp"
#include "banet/data/dataset_io.hpp"
#include "banet/data/pipeline.hpp"
#include "banet/io_util.hpp"
#include "banet/synth/synth.hpp"

using namespace banet;
using namespace banet::synth;
using data::Cohort;
using nn::Rng;

namespace {

// naive DFT power of x in (f_lo, f_hi] Hz
double band_power(std::span<const double> x, double fs, double f_lo, double f_hi) {
  const int n = static_cast<int>(x.size());
  double mean = 0;
  for (double v : x) mean += v / n;
  double power = 0;
  for (int k = 1; k <= n / 2; ++k) {
    const double f = fs * k / n;
    if (f <= f_lo || f > f_hi) continue;
    double re = 0, im = 0;
    for (int t = 0; t < n; ++t) {
      const double a = 6.283185307179586 * k * t / n;
      re += (x[static_cast<size_t>(t)] - mean) * std::cos(a);
      im -= (x[static_cast<size_t>(t)] - mean) * std::sin(a);
    }
    power += (re * re + im * im) / (static_cast<double>(n) * n);
  }
  return power;
}

double variance(std::span<const double> x) {
  double mean = 0;
  for (double v : x) mean += v / static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size());
}

} // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("instance generation basics") {
  SynthConfig cfg;
  SUBCASE("healthy: zero mask, zero raters, valid instance") {
    auto [inst, gt] = generate_instance("H01", Cohort::healthy, {}, cfg, Rng(5));
    data::validate_instance(inst);
    CHECK(gt.planted_parts.empty());
    for (auto m : gt.mask) CHECK(m == 0);
    for (const auto& r : inst.raters)
      for (int i = 0; i < 4; ++i) CHECK(r[static_cast<size_t>(i)] == 0);
    CHECK(inst.activities.size() == 5);
  }
  SUBCASE("same seed reproduces the instance bit-exactly") {
    const std::vector<int> planted = {3, 7, 11};
    auto [a, ga] = generate_instance("P01", Cohort::patient, planted, cfg, Rng(9));
    auto [b, gb] = generate_instance("P01", Cohort::patient, planted, cfg, Rng(9));
    CHECK(a.frames == b.frames);
    CHECK(a.raters == b.raters);
    CHECK(ga.mask == gb.mask);
  }
  SUBCASE("patient instance passes validation and has a plausible mask") {
    const std::vector<int> planted = {2, 9};
    auto [inst, gt] = generate_instance("P02", Cohort::patient, planted, cfg, Rng(17));
    data::validate_instance(inst);
    long long on = 0, act = 0;
    for (auto m : gt.mask) on += m;
    for (const auto& a : inst.activities) act += a.end - a.begin;
    CHECK(on > 0);
    const double frac = static_cast<double>(on) / static_cast<double>(act);
    CHECK(frac == doctest::Approx(cfg.protective_fraction).epsilon(0.25));
  }
}

TEST_CASE("signature statistics: attenuation and tremor") {
  SynthConfig cfg;
  const std::vector<int> planted = {5};
  auto [inst, gt] = generate_instance("P03", Cohort::patient, planted, cfg, Rng(23));
  // collect the planted part's angle samples inside and outside intervals
  // (activity samples only)
  std::vector<double> inside, outside;
  for (const auto& a : inst.activities)
    for (int t = a.begin; t < a.end; ++t)
      (gt.mask[static_cast<size_t>(t)] ? inside : outside)
          .push_back(inst.frames(t, 4)); // part 5 -> angle column 4
  REQUIRE(inside.size() > 400);
  REQUIRE(outside.size() > 400);
  CHECK(variance(inside) < variance(outside));
  const double hi_in = band_power(inside, cfg.sample_rate, 4.0, 29.9);
  const double hi_out = band_power(outside, cfg.sample_rate, 4.0, 29.9);
  CHECK(hi_in > 3.0 * hi_out);

  // a non-planted part shows no attenuation pattern inside intervals
  std::vector<double> np_in, np_out;
  for (const auto& a : inst.activities)
    for (int t = a.begin; t < a.end; ++t)
      (gt.mask[static_cast<size_t>(t)] ? np_in : np_out).push_back(inst.frames(t, 0));
  const double np_hi_in = band_power(np_in, cfg.sample_rate, 4.0, 29.9);
  const double np_hi_out = band_power(np_out, cfg.sample_rate, 4.0, 29.9);
  CHECK(np_hi_in < 3.0 * np_hi_out + 1e-9);
}

TEST_CASE("rater simulation") {
  SUBCASE("noiseless raters reproduce the mask; vote recovers labels") {
    SynthConfig cfg;
    cfg.rater_flip_p = 0.0;
    cfg.rater_jitter = 0;
    const std::vector<int> pl46 = {1, 6};
    auto [inst, gt] = generate_instance("P04", Cohort::patient, pl46, cfg, Rng(31));
    for (size_t t = 0; t < gt.mask.size(); ++t)
      for (int r = 0; r < 4; ++r)
        CHECK(inst.raters[t][static_cast<size_t>(r)] == gt.mask[t]);
    // 2-of-4 vote == mask => segment labels match mask majority
    auto segs = data::segment_instance(inst, 180, 45);
    for (const auto& s : segs) {
      int on = 0;
      for (int t = 0; t < s.unpadded_len; ++t)
        on += gt.mask[static_cast<size_t>(s.abs_start + t)];
      const int want = 2 * on >= s.unpadded_len ? 1 : 0;
      CHECK(s.label == want);
    }
  }
  SUBCASE("all-zero mask stays silent under noise") {
    std::vector<std::uint8_t> mask(1000, 0);
    auto raters = simulate_raters(mask, Rng(3), 0.2, 50);
    for (const auto& r : raters)
      for (int i = 0; i < 4; ++i) CHECK(r[static_cast<size_t>(i)] == 0);
  }
  SUBCASE("vote agreement under the spec noise point (flip 0.05, jitter 30)") {
    SynthConfig cfg;
    long long agree = 0, total = 0;
    for (int rep = 0; rep < 8; ++rep) {
      const std::vector<int> pl48 = {4, 8};
      auto [inst, gt] =
          generate_instance(str_cat("P0", rep + 1), Cohort::patient, pl48, cfg,
                            Rng(100 + rep).derive("mc"));
      auto raters = simulate_raters(gt.mask, Rng(200 + rep), 0.05, 30);
      for (size_t t = 0; t < gt.mask.size(); ++t) {
        const int votes = raters[t][0] + raters[t][1] + raters[t][2] + raters[t][3];
        agree += (votes >= 2 ? 1 : 0) == gt.mask[t];
        ++total;
      }
    }
    const double rate = static_cast<double>(agree) / static_cast<double>(total);
    CHECK(rate >= 0.95);
    // pilot-measured value, frozen as a regression point
    CHECK(rate == doctest::Approx(0.985).epsilon(0.01));
  }
  SUBCASE("flip probability outside the contract") {
    std::vector<std::uint8_t> mask(100, 1);
    CHECK_THROWS_AS(simulate_raters(mask, Rng(1), 0.5, 0), usage_error);
  }
}

TEST_CASE("generated dataset: loadable, deterministic, label fraction in band") {
  namespace fs = std::filesystem;
  const std::string dir1 = (fs::temp_directory_path() / "banet_synth_a").string();
  const std::string dir2 = (fs::temp_directory_path() / "banet_synth_b").string();
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  SynthConfig cfg;
  cfg.n_patients = 3;
  cfg.n_healthy = 3;
  cfg.activity_min_s = 10;
  cfg.activity_max_s = 14;
  cfg.seed = 77;
  generate_dataset(cfg, dir1);
  generate_dataset(cfg, dir2);
  CHECK(hash_directory(dir1) == hash_directory(dir2)); // byte-identical

  auto ds = data::load_dataset(dir1); // zero validation errors
  CHECK(ds.instances.size() == 6);
  CHECK(ds.subjects().size() == 6);

  const auto gt = load_ground_truth(dir1);
  CHECK(gt.instances.size() == 6);
  for (const auto& inst : ds.instances) {
    const auto& g = gt.instances.at(inst.instance_id);
    CHECK(static_cast<int>(g.mask.size()) == inst.frames.rows());
    if (inst.cohort == Cohort::patient) {
      CHECK(!g.planted_parts.empty());
      CHECK(g.planted_parts.size() >= 2);
      CHECK(g.planted_parts.size() <= 4);
    } else {
      CHECK(g.planted_parts.empty());
    }
  }

  // protective-labeled fraction among patient segments tracks the configured
  // interval fraction within +-0.10
  long long prot = 0, tot = 0;
  for (const auto& inst : ds.instances) {
    if (inst.cohort != Cohort::patient) continue;
    for (const auto& s : data::segment_instance(inst, 180, 45)) {
      prot += s.label;
      ++tot;
    }
  }
  REQUIRE(tot > 0);
  const double frac = static_cast<double>(prot) / static_cast<double>(tot);
  CHECK(std::fabs(frac - cfg.protective_fraction) <= 0.10);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("config validation") {
  SynthConfig bad;
  bad.protective_fraction = 1.5;
  CHECK_THROWS_AS(validate(bad), usage_error);
  SynthConfig bad2;
  bad2.tremor_hz = 40.0; // above Nyquist
  CHECK_THROWS_AS(validate(bad2), usage_error);
  SynthConfig bad3;
  bad3.planted_max = 14;
  CHECK_THROWS_AS(validate(bad3), usage_error);
}

TEST_SUITE_END();
