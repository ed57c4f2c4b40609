#pragma once

#include <bit>
#include <cstdint>
#include <cmath>

// Shared transcendental cores. The SIMD lanes implement the exact same
// operation sequence per element, so results are bit-identical across
// scalar / AVX2 / AVX-512 builds. Domain notes:
//   exp_core:  clamps to [-690, 709]; rel. error a few ulp vs true exp.
//   tanh_core: odd polynomial for |x| < 0.125, exp-based elsewhere.
namespace banet::kern::detail {

inline constexpr double kExpLo = -690.0;
inline constexpr double kExpHi = 709.0;
inline constexpr double kLog2E = 1.4426950408889634074;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01; // low mantissa bits zero
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kShiftMagic = 6755399441055744.0; // 2^52 + 2^51

// 1/n! for n = 2..13; exp(r) = 1 + r + r^2*C[0] + ... (Horner over C)
inline constexpr double kExpPoly[12] = {
    5.00000000000000000000e-01, 1.66666666666666666667e-01,
    4.16666666666666666667e-02, 8.33333333333333333333e-03,
    1.38888888888888888889e-03, 1.98412698412698412698e-04,
    2.48015873015873015873e-05, 2.75573192239858906526e-06,
    2.75573192239858906526e-07, 2.50521083854417187751e-08,
    2.08767569878680989792e-09, 1.60590438368216145994e-10,
};

// tanh(x) = x * (1 + t*Q[0] + t^2*Q[1] + ...), t = x^2, valid |x| < 0.125
inline constexpr double kTanhPoly[6] = {
    -3.33333333333333333333e-01, 1.33333333333333333333e-01,
    -5.39682539682539682540e-02, 2.18694885361552028219e-02,
    -8.86323552990219656886e-03, 3.59212803657248101692e-03,
};

inline double exp_core(double x) {
  x = x < kExpLo ? kExpLo : x;
  x = x > kExpHi ? kExpHi : x;
  // round(x/ln2) via the shift trick; kd is the rounded double, n its integer bits
  const double t = x * kLog2E + kShiftMagic;
  const std::int64_t n =
      std::bit_cast<std::int64_t>(t) - std::bit_cast<std::int64_t>(kShiftMagic);
  const double kd = t - kShiftMagic;
  const double r = (x - kd * kLn2Hi) - kd * kLn2Lo;
  double p = kExpPoly[11];
  for (int i = 10; i >= 0; --i) p = p * r + kExpPoly[i];
  p = p * (r * r) + r + 1.0;
  const double scale = std::bit_cast<double>((n + 1023) << 52);
  return p * scale;
}

inline double sigmoid_core(double x) { return 1.0 / (1.0 + exp_core(-x)); }

inline double tanh_core(double x) {
  const double ax = std::fabs(x);
  if (ax < 0.125) {
    const double t = x * x;
    double q = kTanhPoly[5];
    for (int i = 4; i >= 0; --i) q = q * t + kTanhPoly[i];
    return x + x * (t * q);
  }
  const double e = exp_core(2.0 * ax);
  const double y = 1.0 - 2.0 / (e + 1.0);
  return x < 0.0 ? -y : y;
}

} // namespace banet::kern::detail
