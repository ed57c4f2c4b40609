#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <vector>

#include "banet/common.hpp"
#include "banet/io_util.hpp"
#include "banet/nn/grad_check.hpp"
#include "banet/nn/rng.hpp"
#include "banet/zoo/model.hpp"
#include "banet/zoo/serialize.hpp"

using namespace banet;
using namespace banet::zoo;
using nn::Mode;
using nn::Rng;

namespace {

std::vector<double> random_segment(const ModelSpec& spec, const Rng& rng) {
  std::vector<double> seg(static_cast<size_t>(spec.window) * spec.input_dim());
  for (size_t i = 0; i < seg.size(); ++i) seg[i] = 2.0 * rng.unit(i) - 1.0;
  return seg;
}

BatchView view_of(const std::vector<const double*>& xs, const std::vector<int>& ys) {
  return BatchView{std::span<const double* const>(xs.data(), xs.size()),
                   std::span<const int>(ys.data(), ys.size())};
}

ModelSpec reduced(Variant v) {
  ModelSpec s;
  s.variant = v;
  s.window = 12;
  s.hidden = 4;
  return s;
}

} // namespace

TEST_SUITE_BEGIN("zoo");

TEST_CASE("parameter counts match the published table") {
  auto count = [](Variant v) { return Model(ModelSpec{.variant = v}, 1).param_count(); };
  CHECK(count(Variant::banet) == 2131);
  CHECK(count(Variant::banet_time) == 1767);
  CHECK(count(Variant::banet_body) == 2023);
  CHECK(count(Variant::stacked_lstm) == 18986);
  CHECK(count(Variant::bi_lstm) == 14282);
  // reported, not asserted against the table (layouts documented as open):
  MESSAGE("banet-dense parameters: ", count(Variant::banet_dense));
  MESSAGE("banet-compatible parameters: ", count(Variant::banet_compatible));
  MESSAGE("conv-lstm parameters: ", count(Variant::conv_lstm));
}

TEST_CASE("builds are seed-deterministic") {
  for (Variant v : all_variants()) {
    Model a(ModelSpec{.variant = v, .window = 16, .hidden = 4}, 99);
    Model b(ModelSpec{.variant = v, .window = 16, .hidden = 4}, 99);
    Model c(ModelSpec{.variant = v, .window = 16, .hidden = 4}, 100);
    auto av = a.params().all_values();
    auto bv = b.params().all_values();
    auto cv = c.params().all_values();
    bool all_eq = true, any_diff = false;
    for (size_t i = 0; i < av.size(); ++i) {
      all_eq = all_eq && av[i] == bv[i];
      any_diff = any_diff || av[i] != cv[i];
    }
    CHECK(all_eq);
    CHECK(any_diff);
  }
}

TEST_CASE("probability outputs sum to one for every variant") {
  Rng rng(7);
  for (Variant v : all_variants()) {
    ModelSpec spec = reduced(v);
    Model m(spec, 3);
    auto seg = random_segment(spec, rng.derive(static_cast<int>(v)));
    std::vector<const double*> xs = {seg.data()};
    std::vector<int> ys = {1};
    std::vector<double> probs;
    m.predict(view_of(xs, ys), probs);
    CHECK(probs.size() == 2);
    CHECK(probs[0] + probs[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(probs[0] > 0.0);
    CHECK(probs[1] > 0.0);
  }
}

TEST_CASE("zero parameters give the uniform classifier output") {
  ModelSpec spec; // full-size banet
  Model m(spec, 5);
  std::fill(m.params().all_values().begin(), m.params().all_values().end(), 0.0);
  Rng rng(11);
  auto seg = random_segment(spec, rng);
  std::vector<const double*> xs = {seg.data()};
  std::vector<int> ys = {0};
  std::vector<double> probs;
  std::vector<AttentionRecord> att;
  m.predict(view_of(xs, ys), probs, &att);
  CHECK(probs[0] == 0.5);
  CHECK(probs[1] == 0.5);

  // Eq. 1/4 structural check: zero attention weights -> uniform scores
  const auto& rec = att[0];
  REQUIRE(rec.temporal.rows() == 13);
  REQUIRE(rec.temporal.cols() == 180);
  for (int c = 0; c < 13; ++c)
    for (int t = 0; t < 180; ++t)
      CHECK(rec.temporal(c, t) == doctest::Approx(1.0 / 180).epsilon(1e-12));
  REQUIRE(rec.body.rows() == 8);
  REQUIRE(rec.body.cols() == 13);
  for (int k = 0; k < 8; ++k)
    for (int c = 0; c < 13; ++c)
      CHECK(rec.body(k, c) == doctest::Approx(1.0 / 13).epsilon(1e-12));
  for (double s : rec.body_summary) CHECK(s == doctest::Approx(1.0 / 13).epsilon(1e-12));
}

TEST_CASE("attention rows are probability distributions; pooling is convex") {
  ModelSpec spec = reduced(Variant::banet);
  Model m(spec, 21);
  Rng rng(31);
  const int B = 16;
  std::vector<std::vector<double>> segs;
  std::vector<const double*> xs;
  std::vector<int> ys;
  for (int i = 0; i < B; ++i) {
    segs.push_back(random_segment(spec, rng.derive(i)));
    xs.push_back(segs.back().data());
    ys.push_back(i % 2);
  }
  std::vector<double> probs;
  std::vector<AttentionRecord> att;
  m.predict(view_of(xs, ys), probs, &att);
  for (const auto& rec : att) {
    for (int c = 0; c < rec.temporal.rows(); ++c) {
      double s = 0;
      for (int t = 0; t < rec.temporal.cols(); ++t) {
        CHECK(rec.temporal(c, t) > 0.0);
        CHECK(rec.temporal(c, t) <= 1.0);
        s += rec.temporal(c, t);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (int k = 0; k < rec.body.rows(); ++k) {
      double s = 0;
      for (int c = 0; c < rec.body.cols(); ++c) {
        CHECK(rec.body(k, c) > 0.0);
        s += rec.body(k, c);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  // convex-combination property of the temporal pooling, via encode_part
  const int c = 3;
  nn::Matrix H = m.encode_part(segs[0], c);
  const auto& a = att[0].temporal;
  for (int k = 0; k < H.cols(); ++k) {
    double lo = H(0, k), hi = H(0, k), pooled = 0;
    for (int t = 0; t < H.rows(); ++t) {
      lo = std::min(lo, H(t, k));
      hi = std::max(hi, H(t, k));
      pooled += a(c, t) * H(t, k);
    }
    CHECK(pooled >= lo - 1e-12);
    CHECK(pooled <= hi + 1e-12);
  }
}

TEST_CASE("encoder weight sharing: identical part slices encode identically") {
  ModelSpec spec = reduced(Variant::banet);
  Model m(spec, 17);
  Rng rng(41);
  auto seg = random_segment(spec, rng);
  // copy part 2's two columns into part 9
  for (int t = 0; t < spec.window; ++t)
    for (int f = 0; f < 2; ++f)
      seg[static_cast<size_t>(t) * 26 + 9 * 2 + f] =
          seg[static_cast<size_t>(t) * 26 + 2 * 2 + f];
  nn::Matrix h2 = m.encode_part(seg, 2);
  nn::Matrix h9 = m.encode_part(seg, 9);
  CHECK(h2 == h9);
  CHECK(h2.rows() == spec.window);
  CHECK(h2.cols() == spec.resolved_hidden());

  // zero parameters encode everything to zero
  std::fill(m.params().all_values().begin(), m.params().all_values().end(), 0.0);
  nn::Matrix hz = m.encode_part(seg, 5);
  for (size_t i = 0; i < hz.size(); ++i) CHECK(hz.data()[i] == 0.0);
}

TEST_CASE("permutation equivariance of parts") {
  // permuting input parts together with the per-part attention parameters and
  // the part-indexed weights leaves class probabilities unchanged and
  // permutes attention columns
  ModelSpec spec = reduced(Variant::banet);
  const int C = spec.parts, K = spec.resolved_hidden(), T = spec.window;
  Model m(spec, 23);
  Rng rng(51);
  auto seg = random_segment(spec, rng);
  std::vector<int> perm(C);
  std::iota(perm.begin(), perm.end(), 0);
  // fixed shuffle
  auto st = Rng(77).stream();
  for (int i = C - 1; i > 0; --i)
    std::swap(perm[i], perm[st.next_index(static_cast<std::uint64_t>(i) + 1)]);

  Model mp(spec, 23);
  auto& pp = mp.params();
  const auto& ps = m.params();
  // permuted input: part perm[c] of the original sits at slot c
  std::vector<double> segp(seg.size());
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c)
      for (int f = 0; f < 2; ++f)
        segp[static_cast<size_t>(t) * 2 * C + c * 2 + f] =
            seg[static_cast<size_t>(t) * 2 * C + perm[c] * 2 + f];
  // copy all params, then rewire the part-indexed ones
  std::copy(ps.all_values().begin(), ps.all_values().end(), pp.all_values().begin());
  for (size_t b = 0; b < ps.block_count(); ++b) {
    const auto& blk = ps.block(static_cast<int>(b));
    (void)blk;
  }
  auto find_block = [&](const std::string& name) {
    for (size_t b = 0; b < ps.block_count(); ++b)
      if (ps.block(static_cast<int>(b)).name == name) return static_cast<int>(b);
    FAIL("missing block ", name);
    return -1;
  };
  // temporal convs: conv at slot c must equal original conv perm[c]
  for (int c = 0; c < C; ++c) {
    auto src_w = ps.values(find_block(str_cat("tatt.c", perm[c] + 1, ".w")));
    auto dst_w = pp.values(find_block(str_cat("tatt.c", c + 1, ".w")));
    std::copy(src_w.begin(), src_w.end(), dst_w.begin());
    auto src_b = ps.values(find_block(str_cat("tatt.c", perm[c] + 1, ".b")));
    auto dst_b = pp.values(find_block(str_cat("tatt.c", c + 1, ".b")));
    std::copy(src_b.begin(), src_b.end(), dst_b.begin());
  }
  // body FCs act along the part axis: W' = P W P^T, b' = P b
  for (const char* name : {"body.fc1", "body.fc2"}) {
    auto sw = ps.values(find_block(std::string(name) + ".w"));
    auto dw = pp.values(find_block(std::string(name) + ".w"));
    auto sb = ps.values(find_block(std::string(name) + ".b"));
    auto db = pp.values(find_block(std::string(name) + ".b"));
    for (int i = 0; i < C; ++i) {
      db[i] = sb[perm[i]];
      for (int j = 0; j < C; ++j) dw[static_cast<size_t>(i) * C + j] =
          sw[static_cast<size_t>(perm[i]) * C + perm[j]];
    }
  }
  // classifier rows are indexed by (k, c) flattened
  {
    auto sw = ps.values(find_block("clf.w"));
    auto dw = pp.values(find_block("clf.w"));
    for (int k = 0; k < K; ++k)
      for (int c = 0; c < C; ++c)
        for (int cls = 0; cls < 2; ++cls)
          dw[(static_cast<size_t>(k) * C + c) * 2 + cls] =
              sw[(static_cast<size_t>(k) * C + perm[c]) * 2 + cls];
  }

  std::vector<const double*> xs = {seg.data()};
  std::vector<const double*> xps = {segp.data()};
  std::vector<int> ys = {0};
  std::vector<double> pr0, pr1;
  std::vector<AttentionRecord> a0, a1;
  m.predict(view_of(xs, ys), pr0, &a0);
  mp.predict(view_of(xps, ys), pr1, &a1);
  CHECK(pr0[0] == doctest::Approx(pr1[0]).epsilon(1e-12));
  CHECK(pr0[1] == doctest::Approx(pr1[1]).epsilon(1e-12));
  for (int c = 0; c < C; ++c) {
    for (int t = 0; t < T; ++t)
      CHECK(a1[0].temporal(c, t) == doctest::Approx(a0[0].temporal(perm[c], t)).epsilon(1e-12));
    CHECK(a1[0].body_summary[c] ==
          doctest::Approx(a0[0].body_summary[perm[c]]).epsilon(1e-12));
  }
}

TEST_CASE("gradient check: every variant at reduced scale") {
  Rng rng(61);
  for (Variant v : all_variants()) {
    CAPTURE(to_string(v));
    ModelSpec spec = reduced(v);
    Model m(spec, 13 + static_cast<int>(v));
    const int B = 2;
    std::vector<std::vector<double>> segs;
    std::vector<const double*> xs;
    std::vector<int> ys;
    for (int i = 0; i < B; ++i) {
      segs.push_back(random_segment(spec, rng.derive(static_cast<int>(v) * 10 + i)));
      xs.push_back(segs.back().data());
      ys.push_back(i % 2);
    }
    const BatchView batch = view_of(xs, ys);
    const Rng drop_rng = Rng(1234).derive(static_cast<int>(v));
    auto compute = [&] { m.compute_gradients(batch, drop_rng); };
    auto loss_only = [&] { return m.mean_loss(batch, Mode::train, drop_rng); };
    // h balances central-difference truncation against the eps*|L|/2h
    // roundoff floor, which dominates for near-zero gradients
    auto res = nn::grad_check(m.params(), compute, loss_only, 2e-4);
    INFO("variant ", to_string(v), " worst ", res.worst_param, " analytic ",
         res.analytic, " numeric ", res.numeric);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("compute_gradients invariants") {
  ModelSpec spec = reduced(Variant::banet);
  Model m(spec, 3);
  Rng rng(71);
  auto s1 = random_segment(spec, rng.derive(1));
  auto s2 = random_segment(spec, rng.derive(2));

  SUBCASE("mean reduction: duplicated batch leaves gradients unchanged") {
    std::vector<const double*> xs = {s1.data(), s2.data()};
    std::vector<int> ys = {0, 1};
    m.compute_gradients(view_of(xs, ys), Rng(5).derive(0));
    std::vector<double> g1(m.params().all_grads().begin(), m.params().all_grads().end());
    // duplicate every element; per-sample dropout streams must repeat the
    // originals for the comparison to hold, so use infer-mode (no dropout)
    ModelSpec nd = spec;
    nd.dropout = 0.0;
    Model m2(nd, 3);
    std::copy(m.params().all_values().begin(), m.params().all_values().end(),
              m2.params().all_values().begin());
    std::vector<const double*> xs1 = {s1.data(), s2.data()};
    std::vector<const double*> xs2 = {s1.data(), s2.data(), s1.data(), s2.data()};
    std::vector<int> ys1 = {0, 1}, ys2 = {0, 1, 0, 1};
    m2.compute_gradients(view_of(xs1, ys1), Rng(5));
    std::vector<double> ga(m2.params().all_grads().begin(), m2.params().all_grads().end());
    m2.compute_gradients(view_of(xs2, ys2), Rng(5));
    std::vector<double> gb(m2.params().all_grads().begin(), m2.params().all_grads().end());
    for (size_t i = 0; i < ga.size(); ++i)
      CHECK(ga[i] == doctest::Approx(gb[i]).epsilon(1e-12));
    (void)g1;
  }
  SUBCASE("gradients are finite and depend deterministically on rng") {
    std::vector<const double*> xs = {s1.data()};
    std::vector<int> ys = {1};
    m.compute_gradients(view_of(xs, ys), Rng(5).derive(9));
    std::vector<double> ga(m.params().all_grads().begin(), m.params().all_grads().end());
    for (double g : ga) CHECK(std::isfinite(g));
    m.compute_gradients(view_of(xs, ys), Rng(5).derive(9));
    std::vector<double> gb(m.params().all_grads().begin(), m.params().all_grads().end());
    CHECK(ga == gb);
  }
  SUBCASE("empty batch is a usage error") {
    std::vector<const double*> xs;
    std::vector<int> ys;
    CHECK_THROWS_AS(m.compute_gradients(view_of(xs, ys), Rng(1)), usage_error);
  }
}

TEST_CASE("inference is a pure function") {
  ModelSpec spec = reduced(Variant::banet);
  Model m(spec, 29);
  Rng rng(81);
  auto seg = random_segment(spec, rng);
  std::vector<const double*> xs = {seg.data()};
  std::vector<int> ys = {0};
  std::vector<double> p1, p2;
  m.predict(view_of(xs, ys), p1);
  m.predict(view_of(xs, ys), p2);
  CHECK(p1 == p2);
}

TEST_CASE("attention request on a baseline is a usage error") {
  ModelSpec spec = reduced(Variant::stacked_lstm);
  Model m(spec, 1);
  auto seg = random_segment(spec, Rng(1));
  std::vector<const double*> xs = {seg.data()};
  std::vector<int> ys = {0};
  std::vector<double> probs;
  std::vector<AttentionRecord> att;
  CHECK_THROWS_AS(m.predict(view_of(xs, ys), probs, &att), usage_error);
}

TEST_CASE("model serialization round-trips bit-exactly") {
  const std::string path = (std::filesystem::temp_directory_path() / "banet_model_test.bin").string();
  ModelSpec spec = reduced(Variant::banet);
  Model m(spec, 42);
  // perturb params so they differ from the fresh seed-42 init
  auto vals = m.params().all_values();
  for (size_t i = 0; i < vals.size(); ++i) vals[i] += 1e-3 * static_cast<double>(i % 7);
  save_model(m, path);
  Model r = load_model(path);
  CHECK(r.spec().variant == spec.variant);
  CHECK(r.spec().window == spec.window);
  CHECK(r.seed() == 42);
  auto rv = r.params().all_values();
  REQUIRE(rv.size() == vals.size());
  for (size_t i = 0; i < vals.size(); ++i) CHECK(rv[i] == vals[i]);
  // same file again -> byte-identical (save is deterministic)
  const std::string path2 = path + ".2";
  save_model(r, path2);
  CHECK(read_file(path) == read_file(path2));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
  CHECK_THROWS_AS(load_model("/nonexistent/banet.bin"), io_error);
}

TEST_SUITE_END();
