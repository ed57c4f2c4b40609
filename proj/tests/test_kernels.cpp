#include <doctest.h>

#include <cmath>
#include <vector>

#include "banet/kern/kernels.hpp"
#include "banet/kern/scalar_math.hpp"
#include "banet/nn/rng.hpp"

using banet::kern::active;
using banet::kern::available;
using banet::kern::select;
using banet::nn::Rng;

namespace {

std::vector<double> random_vec(size_t n, const Rng& rng, double lo = -5.0,
                               double hi = 5.0) {
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.unit(i);
  return v;
}

// Independent long-double reference for the GEMM contract.
void gemm_nn_ld(int m, int n, int k, const std::vector<double>& a,
                const std::vector<double>& b, std::vector<double>& c) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      long double acc = c[i * n + j];
      for (int p = 0; p < k; ++p)
        acc += static_cast<long double>(a[i * k + p]) * b[p * n + j];
      c[i * n + j] = static_cast<double>(acc);
    }
}

struct LaneGuard {
  ~LaneGuard() { select("auto"); }
};

} // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("lane selection") {
  LaneGuard guard;
  auto lanes = available();
  CHECK(!lanes.empty());
  CHECK(lanes.back() == "scalar");
  for (const auto& l : lanes) {
    CHECK(select(l));
    CHECK(std::string(active().name) == l);
  }
  CHECK(select("auto"));
  CHECK_FALSE(select("not-a-lane"));
}

TEST_CASE("gemm matches long-double oracle") {
  LaneGuard guard;
  Rng rng(101);
  for (const auto& lane : available()) {
    REQUIRE(select(lane));
    for (int trial = 0; trial < 10; ++trial) {
      const Rng tr = rng.derive(trial);
      const int m = 1 + static_cast<int>(tr.bits(0) % 9);
      const int n = 1 + static_cast<int>(tr.bits(1) % 40);
      const int k = 1 + static_cast<int>(tr.bits(2) % 33);
      auto a = random_vec(static_cast<size_t>(m) * k, tr.derive(1));
      auto b = random_vec(static_cast<size_t>(k) * n, tr.derive(2));
      auto c = random_vec(static_cast<size_t>(m) * n, tr.derive(3));
      auto expect = c;
      gemm_nn_ld(m, n, k, a, b, expect);
      active().gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n);
      for (size_t i = 0; i < c.size(); ++i)
        CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("gemm_tn matches transposed gemm_nn") {
  LaneGuard guard;
  Rng rng(202);
  for (const auto& lane : available()) {
    REQUIRE(select(lane));
    const int m = 7, n = 19, k = 11;
    auto at = random_vec(static_cast<size_t>(k) * m, rng.derive(1)); // stored k x m
    auto b = random_vec(static_cast<size_t>(k) * n, rng.derive(2));
    std::vector<double> a(static_cast<size_t>(m) * k);
    for (int p = 0; p < k; ++p)
      for (int i = 0; i < m; ++i) a[i * k + p] = at[p * m + i];
    std::vector<double> c1(static_cast<size_t>(m) * n, 0.25);
    std::vector<double> c2 = c1;
    active().gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
    active().gemm_tn(m, n, k, at.data(), m, b.data(), n, c2.data(), n);
    for (size_t i = 0; i < c1.size(); ++i)
      CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-13));
  }
}

TEST_CASE("all lanes produce bit-identical results") {
  LaneGuard guard;
  const auto lanes = available();
  if (lanes.size() < 2) return; // nothing to compare on this machine
  Rng rng(303);

  // gemm
  const int m = 9, n = 37, k = 18;
  auto a = random_vec(static_cast<size_t>(m) * k, rng.derive(1));
  auto b = random_vec(static_cast<size_t>(k) * n, rng.derive(2));
  auto c0 = random_vec(static_cast<size_t>(m) * n, rng.derive(3));
  auto at = random_vec(static_cast<size_t>(k) * m, rng.derive(9)); // k x m for gemm_tn
  std::vector<std::vector<double>> outs;
  for (const auto& lane : lanes) {
    REQUIRE(select(lane));
    auto c = c0;
    active().gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n);
    active().gemm_tn(m, n, k, at.data(), m, b.data(), n, c.data(), n);
    outs.push_back(std::move(c));
  }
  for (size_t l = 1; l < outs.size(); ++l)
    for (size_t i = 0; i < outs[0].size(); ++i) CHECK(outs[0][i] == outs[l][i]);

  // elementwise
  std::vector<double> xs = random_vec(1003, rng.derive(4), -30.0, 30.0);
  xs.insert(xs.end(), {0.0, -0.0, 1e-300, -1e-300, 0.125, -0.125, 0.1249999,
                       689.9, 690.0, -690.0, 700.0, 709.0, 710.5, -800.0});
  for (auto op : {0, 1, 2}) {
    std::vector<std::vector<double>> res;
    for (const auto& lane : lanes) {
      REQUIRE(select(lane));
      std::vector<double> y(xs.size());
      if (op == 0) active().exp_v(xs.data(), y.data(), static_cast<int>(xs.size()));
      if (op == 1) active().sigmoid_v(xs.data(), y.data(), static_cast<int>(xs.size()));
      if (op == 2) active().tanh_v(xs.data(), y.data(), static_cast<int>(xs.size()));
      res.push_back(std::move(y));
    }
    for (size_t l = 1; l < res.size(); ++l)
      for (size_t i = 0; i < res[0].size(); ++i) {
        INFO("op ", op, " x=", xs[i]);
        CHECK(res[0][i] == res[l][i]);
      }
  }

  // lstm pointwise fwd/bwd
  const int cells = 147;
  auto gi0 = random_vec(cells, rng.derive(5));
  auto gf0 = random_vec(cells, rng.derive(6));
  auto go0 = random_vec(cells, rng.derive(7));
  auto gg0 = random_vec(cells, rng.derive(8));
  auto cprev = random_vec(cells, rng.derive(9));
  auto dh = random_vec(cells, rng.derive(10));
  auto dcin = random_vec(cells, rng.derive(11));
  std::vector<std::vector<double>> fw;
  for (const auto& lane : lanes) {
    REQUIRE(select(lane));
    auto gi = gi0, gf = gf0, go = go0, gg = gg0;
    std::vector<double> c(cells), tc(cells), h(cells);
    active().lstm_point_fwd(cells, gi.data(), gf.data(), go.data(), gg.data(),
                            cprev.data(), c.data(), tc.data(), h.data());
    std::vector<double> dgi(cells), dgf(cells), dgo(cells), dgg(cells), dcp(cells);
    active().lstm_point_bwd(cells, gi.data(), gf.data(), go.data(), gg.data(),
                            tc.data(), cprev.data(), dh.data(), dcin.data(),
                            dgi.data(), dgf.data(), dgo.data(), dgg.data(),
                            dcp.data());
    std::vector<double> all;
    for (auto* v : {&gi, &gf, &go, &gg, &c, &tc, &h, &dgi, &dgf, &dgo, &dgg, &dcp})
      all.insert(all.end(), v->begin(), v->end());
    fw.push_back(std::move(all));
  }
  for (size_t l = 1; l < fw.size(); ++l)
    for (size_t i = 0; i < fw[0].size(); ++i) CHECK(fw[0][i] == fw[l][i]);
}

TEST_CASE("exp/tanh/sigmoid accuracy against libm") {
  LaneGuard guard;
  namespace d = banet::kern::detail;
  for (double x = -680.0; x <= 700.0; x += 0.619) {
    const double got = d::exp_core(x);
    const double want = std::exp(x);
    CHECK(got == doctest::Approx(want).epsilon(5e-15));
  }
  for (double x = -40.0; x <= 40.0; x += 0.0917) {
    CHECK(d::tanh_core(x) == doctest::Approx(std::tanh(x)).epsilon(5e-14));
    const double sig = 1.0 / (1.0 + std::exp(-x));
    CHECK(d::sigmoid_core(x) == doctest::Approx(sig).epsilon(5e-14));
  }
  CHECK(d::tanh_core(0.0) == 0.0);
  CHECK(d::sigmoid_core(0.0) == 0.5);
  CHECK(d::exp_core(0.0) == 1.0);
  CHECK(d::exp_core(710.0) == d::exp_core(709.0)); // saturation
  CHECK(d::exp_core(-800.0) == d::exp_core(-690.0));
}

TEST_CASE("elementwise helpers") {
  LaneGuard guard;
  Rng rng(404);
  auto a = random_vec(517, rng.derive(1));
  auto b = random_vec(517, rng.derive(2));
  for (const auto& lane : available()) {
    REQUIRE(select(lane));
    std::vector<double> y(a.size()), z(a.size(), 0.5);
    active().mul_v(a.data(), b.data(), y.data(), static_cast<int>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) CHECK(y[i] == a[i] * b[i]);
    active().add_v(a.data(), b.data(), y.data(), static_cast<int>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) CHECK(y[i] == a[i] + b[i]);
    active().madd_v(a.data(), b.data(), z.data(), static_cast<int>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) CHECK(z[i] == 0.5 + a[i] * b[i]);
  }
}

TEST_SUITE_END();
