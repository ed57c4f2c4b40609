#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "banet/common.hpp"
#include "banet/data/dataset_io.hpp"
#include "banet/data/pipeline.hpp"
#include "banet/io_util.hpp"
#include "banet/nn/rng.hpp"

using namespace banet;
using namespace banet::data;
using nn::Rng;

namespace {

// instance with one activity block of the given length, flags settable
MovementInstance make_instance(int block_len, const std::string& subject = "P01",
                               Cohort cohort = Cohort::patient, int lead = 7) {
  MovementInstance inst;
  inst.subject_id = subject;
  inst.instance_id = subject + "_t01";
  inst.cohort = cohort;
  const int T = lead + block_len + 5;
  inst.frames = nn::Matrix(T, kFeatureCols);
  Rng rng(fnv1a64(subject));
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < kParts; ++c) {
      inst.frames(t, c) = 0.5 + 2.0 * rng.unit(static_cast<std::uint64_t>(t) * 13 + c);
      inst.frames(t, kParts + c) = rng.unit(1000000 + static_cast<std::uint64_t>(t) * 13 + c);
    }
  inst.raters.assign(static_cast<size_t>(T), {0, 0, 0, 0});
  inst.activities.push_back({"bend", lead, lead + block_len});
  return inst;
}

std::array<double, 3> rotate(const std::array<double, 3>& p, const std::array<double, 3>& axis,
                             double angle, const std::array<double, 3>& shift) {
  // Rodrigues rotation
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  const double kx = axis[0] / n, ky = axis[1] / n, kz = axis[2] / n;
  const double c = std::cos(angle), s = std::sin(angle);
  const double dot = kx * p[0] + ky * p[1] + kz * p[2];
  std::array<double, 3> cross = {ky * p[2] - kz * p[1], kz * p[0] - kx * p[2],
                                 kx * p[1] - ky * p[0]};
  std::array<double, 3> out;
  for (int i = 0; i < 3; ++i) {
    const double k = i == 0 ? kx : i == 1 ? ky : kz;
    out[static_cast<size_t>(i)] =
        p[static_cast<size_t>(i)] * c + cross[static_cast<size_t>(i)] * s +
        k * dot * (1 - c) + shift[static_cast<size_t>(i)];
  }
  return out;
}

} // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("joint angle") {
  CHECK(joint_angle({1, 0, 0}, {0, 0, 0}, {0, 1, 0}) ==
        doctest::Approx(1.5707963267948966).epsilon(1e-14));
  CHECK(joint_angle({1, 0, 0}, {0, 0, 0}, {2, 0, 0}) == doctest::Approx(0.0));
  CHECK(joint_angle({1, 0, 0}, {0, 0, 0}, {-3, 0, 0}) ==
        doctest::Approx(3.14159265358979323846).epsilon(1e-12));
  CHECK_THROWS_AS(joint_angle({0, 0, 0}, {0, 0, 0}, {1, 0, 0}), usage_error);

  // invariance under rotation + translation
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const Rng tr = rng.derive(trial);
    auto pt = [&](int i) {
      return std::array<double, 3>{4 * tr.unit(3 * i) - 2, 4 * tr.unit(3 * i + 1) - 2,
                                   4 * tr.unit(3 * i + 2) - 2};
    };
    auto a = pt(0), b = pt(1), c = pt(2);
    const double base = joint_angle(a, b, c);
    const std::array<double, 3> axis = {tr.unit(90) + 0.01, tr.unit(91), tr.unit(92)};
    const double ang = 6.28 * tr.unit(93);
    const std::array<double, 3> shift = {10 * tr.unit(94), -5 * tr.unit(95), tr.unit(96)};
    const double rot = joint_angle(rotate(a, axis, ang, shift), rotate(b, axis, ang, shift),
                                   rotate(c, axis, ang, shift));
    CHECK(rot == doctest::Approx(base).epsilon(1e-9));
    CHECK(base >= 0.0);
    CHECK(base <= 3.14159265358979323846);
  }
}

TEST_CASE("angular energy") {
  std::vector<double> constant(10, 1.3);
  for (double e : angular_energy(constant, 60.0)) CHECK(e == 0.0);
  const std::vector<double> theta = {0.0, 0.1};
  const auto e = angular_energy(theta, 60.0);
  CHECK(e[0] == 0.0);
  CHECK(e[1] == doctest::Approx(36.0).epsilon(1e-12));
  Rng rng(4);
  std::vector<double> rnd(50);
  for (size_t i = 0; i < rnd.size(); ++i) rnd[i] = rng.unit(i) * 3;
  for (double v : angular_energy(rnd, 60.0)) CHECK(v >= 0.0);
}

TEST_CASE("segmentation enumeration") {
  SUBCASE("block length 300: five windows, stride 45") {
    auto segs = segment_instance(make_instance(300), 180, 45);
    REQUIRE(segs.size() == 5);
    const int starts[] = {0, 45, 90, 135, 180};
    const int unpadded[] = {180, 180, 180, 165, 120};
    int padded = 0;
    for (size_t i = 0; i < 5; ++i) {
      CHECK(segs[i].start == starts[i]);
      CHECK(segs[i].unpadded_len == unpadded[i]);
      CHECK(segs[i].x.rows() == 180);
      CHECK(segs[i].x.cols() == 26);
      padded += segs[i].unpadded_len < 180;
      for (int t = segs[i].unpadded_len; t < 180; ++t)
        for (int c = 0; c < 26; ++c) CHECK(segs[i].x(t, c) == 0.0);
    }
    CHECK(padded == 2);
  }
  SUBCASE("block length 180: three windows") {
    auto segs = segment_instance(make_instance(180), 180, 45);
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].unpadded_len == 180);
    CHECK(segs[1].unpadded_len == 135);
    CHECK(segs[2].unpadded_len == 90);
  }
  SUBCASE("short block: one padded window") {
    auto segs = segment_instance(make_instance(60), 180, 45);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].start == 0);
    CHECK(segs[0].unpadded_len == 60);
  }
  SUBCASE("empty activity list gives empty result") {
    auto inst = make_instance(300);
    inst.activities.clear();
    CHECK(segment_instance(inst).empty());
  }
  SUBCASE("columns are part-blocked (angle, energy) pairs") {
    auto inst = make_instance(200);
    auto segs = segment_instance(inst, 180, 45);
    const auto& s = segs[0];
    for (int c = 0; c < kParts; ++c) {
      CHECK(s.x(0, 2 * c) == inst.frames(s.abs_start, c));
      CHECK(s.x(0, 2 * c + 1) == inst.frames(s.abs_start, kParts + c));
    }
  }
}

TEST_CASE("segment labeling") {
  SUBCASE("exactly half protective is protective (inclusive boundary)") {
    std::vector<std::array<std::uint8_t, 4>> rows(180, {0, 0, 0, 0});
    for (int t = 0; t < 90; ++t) rows[static_cast<size_t>(t)] = {1, 1, 0, 0};
    CHECK(label_segment(rows, 180) == 1);
    rows[89] = {1, 0, 0, 0}; // 89 protective of 180
    CHECK(label_segment(rows, 180) == 0);
  }
  SUBCASE("one rater is not enough") {
    std::vector<std::array<std::uint8_t, 4>> rows(100, {1, 0, 0, 0});
    CHECK(label_segment(rows, 100) == 0);
  }
  SUBCASE("all flags zero") {
    std::vector<std::array<std::uint8_t, 4>> rows(100, {0, 0, 0, 0});
    CHECK(label_segment(rows, 100) == 0);
  }
  SUBCASE("padding excluded from the denominator: 59/120 is non-protective") {
    std::vector<std::array<std::uint8_t, 4>> rows(180, {0, 0, 0, 0});
    for (int t = 0; t < 59; ++t) rows[static_cast<size_t>(t)] = {0, 1, 1, 1};
    CHECK(label_segment(rows, 120) == 0);
    rows[59] = {1, 1, 0, 0}; // 60/120
    CHECK(label_segment(rows, 120) == 1);
  }
  SUBCASE("monotone in rater upgrades") {
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
      const Rng tr = rng.derive(trial);
      std::vector<std::array<std::uint8_t, 4>> rows(60);
      for (int t = 0; t < 60; ++t)
        for (int r = 0; r < 4; ++r)
          rows[static_cast<size_t>(t)][static_cast<size_t>(r)] =
              tr.unit(static_cast<std::uint64_t>(t) * 4 + r) < 0.4 ? 1 : 0;
      const int before = label_segment(rows, 60);
      auto upgraded = rows;
      const int t = static_cast<int>(tr.bits(1000) % 60);
      upgraded[static_cast<size_t>(t)] = {1, 1, 1, 1};
      const int after = label_segment(upgraded, 60);
      CHECK(after >= before);
    }
  }
}

TEST_CASE("normalizer") {
  auto inst = make_instance(400);
  auto segs = segment_instance(inst, 180, 45);
  std::vector<const Segment*> ptrs;
  for (const auto& s : segs) ptrs.push_back(&s);
  const auto nm = Normalizer::fit(ptrs);

  SUBCASE("fit-apply gives zero mean unit variance over unpadded rows") {
    auto copies = segs;
    for (auto& s : copies) nm.apply(s);
    for (int c = 0; c < kFeatureCols; ++c) {
      double sum = 0, sumsq = 0;
      long long n = 0;
      for (const auto& s : copies)
        for (int t = 0; t < s.unpadded_len; ++t) {
          sum += s.x(t, c);
          sumsq += s.x(t, c) * s.x(t, c);
          ++n;
        }
      const double mean = sum / static_cast<double>(n);
      CHECK(std::fabs(mean) < 1e-9);
      CHECK(sumsq / static_cast<double>(n) - mean * mean ==
            doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("padded rows stay exactly zero; invert recovers input") {
    auto s = segs[segs.size() - 1];
    REQUIRE(s.unpadded_len < 180);
    auto orig = s;
    nm.apply(s);
    for (int t = s.unpadded_len; t < 180; ++t)
      for (int c = 0; c < 26; ++c) CHECK(s.x(t, c) == 0.0);
    nm.invert(s);
    for (int t = 0; t < s.unpadded_len; ++t)
      for (int c = 0; c < 26; ++c)
        CHECK(s.x(t, c) == doctest::Approx(orig.x(t, c)).epsilon(1e-9));
  }
  SUBCASE("constant column gets the floored deviation and normalizes to zero") {
    auto segs2 = segs;
    for (auto& s : segs2)
      for (int t = 0; t < s.unpadded_len; ++t) s.x(t, 4) = 2.71;
    std::vector<const Segment*> p2;
    for (const auto& s : segs2) p2.push_back(&s);
    const auto nm2 = Normalizer::fit(p2);
    CHECK(nm2.stddev[4] == 1e-8);
    auto s = segs2[0];
    nm2.apply(s);
    for (int t = 0; t < s.unpadded_len; ++t) CHECK(s.x(t, 4) == 0.0);
  }
  SUBCASE("empty fit is a usage error") {
    std::vector<const Segment*> none;
    CHECK_THROWS_AS(Normalizer::fit(none), usage_error);
  }
}

TEST_CASE("augmentation") {
  auto inst = make_instance(200);
  auto segs = segment_instance(inst, 180, 45);
  const Segment& padded = segs.back();
  REQUIRE(padded.unpadded_len < 180);

  SUBCASE("sigma=0 and p=0 are identities") {
    CHECK(augment_gauss(padded, 0.0, Rng(1)).x == padded.x);
    CHECK(augment_dropout(padded, 0.0, Rng(1)).x == padded.x);
  }
  SUBCASE("p=1 zeroes the unpadded region") {
    auto a = augment_dropout(padded, 1.0, Rng(1));
    for (int t = 0; t < 180; ++t)
      for (int c = 0; c < 26; ++c) CHECK(a.x(t, c) == 0.0);
  }
  SUBCASE("noise touches only unpadded rows; metadata preserved") {
    auto a = augment_gauss(padded, 0.1, Rng(7));
    for (int t = padded.unpadded_len; t < 180; ++t)
      for (int c = 0; c < 26; ++c) CHECK(a.x(t, c) == 0.0);
    CHECK(a.label == padded.label);
    CHECK(a.subject_id == padded.subject_id);
    CHECK(a.activity == padded.activity);
    CHECK(a.unpadded_len == padded.unpadded_len);
    CHECK(a.prov == Provenance::gauss);
    CHECK(a.prov_param == 0.1);
  }
  SUBCASE("part dropout removes both feature columns together") {
    auto a = augment_dropout(padded, 0.5, Rng(3));
    int zeroed = 0;
    for (int t = 0; t < padded.unpadded_len; ++t)
      for (int c = 0; c < kParts; ++c) {
        const bool z0 = a.x(t, 2 * c) == 0.0 && padded.x(t, 2 * c) != 0.0;
        const bool z1 = a.x(t, 2 * c + 1) == 0.0 && padded.x(t, 2 * c + 1) != 0.0;
        CHECK(z0 == z1);
        zeroed += z0;
      }
    CHECK(zeroed > 0);
  }
  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(augment_gauss(padded, -0.1, Rng(1)), usage_error);
    CHECK_THROWS_AS(augment_dropout(padded, 1.5, Rng(1)), usage_error);
  }
  SUBCASE("default expansion is exactly 7x and deterministic") {
    auto out = expand_training_set(segs, Rng(42));
    CHECK(out.size() == segs.size() * 7);
    int orig = 0, gauss = 0, drop = 0;
    for (const auto& s : out) {
      orig += s.prov == Provenance::original;
      gauss += s.prov == Provenance::gauss;
      drop += s.prov == Provenance::dropout;
    }
    CHECK(orig == static_cast<int>(segs.size()));
    CHECK(gauss == static_cast<int>(segs.size() * 3));
    CHECK(drop == static_cast<int>(segs.size() * 3));
    auto out2 = expand_training_set(segs, Rng(42));
    REQUIRE(out2.size() == out.size());
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i].x == out2[i].x);
  }
}

TEST_CASE("loso folds") {
  std::vector<std::string> subjects;
  for (int i = 0; i < 30; ++i) subjects.push_back(str_cat("S", i));
  subjects.push_back("S3"); // duplicate collapses
  auto folds = loso_folds(subjects);
  CHECK(folds.size() == 30);
  std::vector<std::string> tested;
  for (const auto& f : folds) {
    tested.push_back(f.test_subject);
    CHECK(f.train_subjects.size() == 29);
    for (const auto& tr : f.train_subjects) CHECK(tr != f.test_subject);
  }
  std::sort(tested.begin(), tested.end());
  tested.erase(std::unique(tested.begin(), tested.end()), tested.end());
  CHECK(tested.size() == 30);

  std::vector<std::string> one = {"only"};
  CHECK_THROWS_AS(loso_folds(one), usage_error);
}

TEST_CASE("dataset io round trip") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "banet_ds_test").string();
  fs::remove_all(dir);

  auto p1 = make_instance(250, "P01", Cohort::patient);
  for (int t = 10; t < 150; ++t) p1.raters[static_cast<size_t>(t)] = {1, 1, 0, 1};
  auto h1 = make_instance(220, "H01", Cohort::healthy);
  write_dataset(dir, {p1, h1}, 60.0);

  auto ds = load_dataset(dir);
  CHECK(ds.instances.size() == 2);
  CHECK(ds.subjects() == std::vector<std::string>{"H01", "P01"});
  const auto& r1 = ds.instances[0];
  CHECK(r1.instance_id == "P01_t01");
  CHECK(r1.cohort == Cohort::patient);
  CHECK(r1.frames == p1.frames); // bit-exact numeric round trip
  CHECK(r1.raters == p1.raters);
  REQUIRE(r1.activities.size() == 1);
  CHECK(r1.activities[0].type == "bend");
  CHECK(r1.activities[0].begin == p1.activities[0].begin);
  CHECK(r1.activities[0].end == p1.activities[0].end);

  SUBCASE("manifest referencing a missing file") {
    fs::remove(fs::path(dir) / "P01_t01.csv");
    CHECK_THROWS_AS(load_dataset(dir), load_error);
  }
  SUBCASE("out-of-range angle is a validation error") {
    auto bad = p1;
    bad.frames(3, 2) = 3.5;
    CHECK_THROWS_AS(validate_instance(bad), load_error);
    fs::remove_all(dir + "_bad");
    write_dataset(dir + "_bad", {bad}, 60.0);
    CHECK_THROWS_AS(load_dataset(dir + "_bad"), load_error);
    fs::remove_all(dir + "_bad");
  }
  SUBCASE("overlapping activities rejected") {
    auto bad = p1;
    bad.activities.push_back({"reach-forward", 100, 180});
    CHECK_THROWS_AS(validate_instance(bad), load_error);
  }
  SUBCASE("healthy instance with rater flags rejected") {
    auto bad = h1;
    bad.raters[5] = {1, 1, 0, 0};
    CHECK_THROWS_AS(validate_instance(bad), load_error);
  }
  fs::remove_all(dir);
}

TEST_CASE("absent energies are computed from angles") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "banet_ds_absent").string();
  fs::remove_all(dir);
  auto inst = make_instance(120, "H02", Cohort::healthy);
  write_dataset(dir, {inst}, 60.0);
  // blank out all energy_01 cells
  const std::string csv_path = dir + "/H02_t01.csv";
  std::string text = read_file(csv_path);
  std::string out;
  size_t lineno = 0;
  for (size_t pos = 0; pos < text.size();) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    if (lineno > 0 && !line.empty()) {
      // replace the 15th field (energy_01)
      size_t start = 0;
      for (int f = 0; f < 14; ++f) start = line.find(',', start) + 1;
      const size_t end = line.find(',', start);
      line = line.substr(0, start) + "-" + line.substr(end);
    }
    out += line;
    out += '\n';
    pos = eol + 1;
    ++lineno;
  }
  atomic_write_file(csv_path, out);
  auto ds = load_dataset(dir);
  const auto& got = ds.instances[0];
  std::vector<double> theta(static_cast<size_t>(got.frames.rows()));
  for (int t = 0; t < got.frames.rows(); ++t) theta[static_cast<size_t>(t)] = got.frames(t, 0);
  const auto want = angular_energy(theta, 60.0);
  for (int t = 0; t < got.frames.rows(); ++t)
    CHECK(got.frames(t, kParts) == doctest::Approx(want[static_cast<size_t>(t)]).epsilon(1e-12));
  fs::remove_all(dir);
}

TEST_SUITE_END();
