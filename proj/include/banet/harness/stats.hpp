#pragma once

#include <span>

namespace banet::harness {

struct TTestResult {
  double t = 0;
  double p = 1;
  int df = 0;
  bool degenerate = false; // zero-variance differences
};

// Two-sided paired t-test on per-fold scores (paired by index). Identical
// arrays give t=0, p=1. Zero-variance nonzero-mean differences report p=0
// with the degenerate flag set.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

// Two-sided p for Student's t with df degrees of freedom.
double student_two_sided_p(double t, int df);

// Bonferroni correction helper: min(1, p*m).
double bonferroni(double p, int m);

// Regularized incomplete beta I_x(a, b) (continued-fraction evaluation).
double reg_incomplete_beta(double a, double b, double x);

} // namespace banet::harness
