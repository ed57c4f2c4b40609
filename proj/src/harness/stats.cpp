#include "banet/harness/stats.hpp"

#include <cmath>
#include <limits>

#include "banet/common.hpp"

namespace banet::harness {

namespace {

// Continued-fraction for the incomplete beta (modified Lentz iteration).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

} // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw usage_error("reg_incomplete_beta: a,b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
               a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_two_sided_p(double t, int df) {
  if (df < 1) throw usage_error("student_two_sided_p: df must be >= 1");
  if (!std::isfinite(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double v = static_cast<double>(df);
  return reg_incomplete_beta(v / 2.0, 0.5, v / (v + t * t));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw usage_error("paired_ttest: length mismatch");
  const int n = static_cast<int>(a.size());
  if (n < 2) throw usage_error("paired_ttest: need n >= 2 pairs");
  double mean = 0;
  for (int i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (n - 1));
  TTestResult res;
  res.df = n - 1;
  if (sd == 0.0) {
    res.degenerate = true;
    if (mean == 0.0) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = mean > 0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
      res.p = 0.0;
    }
    return res;
  }
  res.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  res.p = student_two_sided_p(res.t, res.df);
  return res;
}

double bonferroni(double p, int m) {
  if (m < 1) throw usage_error("bonferroni: m must be >= 1");
  const double q = p * m;
  return q > 1.0 ? 1.0 : q;
}

} // namespace banet::harness
