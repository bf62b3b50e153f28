#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "exk/types.hpp"

namespace exk {

/// Probabilists' Hermite polynomial He_k(x) = (-1)^k e^{x^2/2} d^k/dx^k e^{-x^2/2}
/// (He_2 = x^2 - 1, not the physicists' 4x^2 - 2), via He_{k+1} = x He_k - k He_{k-1}.
template <typename Scalar>
Scalar hermite(int k, Scalar x) {
  if (k <= 0) return Scalar(1);
  Scalar prev(1), cur = x;
  for (int n = 1; n < k; ++n) {
    Scalar next = x * cur - Scalar(n) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Standard Gaussian upper tail Psi(u) = P(Z >= u).
inline double gauss_tail(double u) { return 0.5 * std::erfc(u / std::sqrt(2.0)); }

inline double normal_cdf(double x) { return gauss_tail(-x); }

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Phi^{-1}(p) for p in (0,1).
double normal_quantile(double p);

/// Psi^{-1}(q): the x with P(Z >= x) = q, accurate for tiny q.
double normal_upper_quantile(double q);

/// |numeric integral of He_k(x) e^{-x^2/2} over [u, inf) - He_{k-1}(u) e^{-u^2/2}|.
double hermite_tail_identity_check(int k, double u);

/// Gaussian variable conditioned on a block of other coordinates of a joint vector.
struct CondGaussian {
  Matrix joint_cov;
  int target = 0;
  std::vector<int> conditioners;
  Vector mean_coeffs;  // E[target | cond = z] = mean_coeffs . z
  double cond_variance = 0.0;
};

/// Schur complement of the conditioner block. Throws DegenerateModelError when
/// that block is singular.
CondGaussian condition(const Matrix& joint_cov, int target, const std::vector<int>& conditioners);

/// Multi-target version: conditional covariance of `targets` given `conditioners`
/// and the regression matrix (rows = targets).
struct CondBlock {
  Matrix cov;
  Matrix coeffs;
};
CondBlock condition_block(const Matrix& joint_cov, const std::vector<int>& targets,
                          const std::vector<int>& conditioners);

/// Rectangle probability P(lower <= Y <= upper) for Y ~ N(mean, cov); bounds may be +-inf.
struct MvnProblem {
  Matrix cov;
  Vector lower;
  Vector upper;
  Vector mean;  // empty means zero
};

struct MvnOptions {
  int points_per_randomization = 1 << 13;
  int randomizations = 12;
  int max_points_per_randomization = 1 << 17;
};

struct MvnResult {
  double p = 0.0;
  double err_est = 0.0;  // 3 x standard error across randomizations
  bool warning = false;  // requested accuracy not reached within the sample budget
};

/// Separation-of-variables transform with reordered Cholesky factor and
/// randomly shifted rank-1 lattice points; deterministic for fixed seed.
MvnResult mvn_prob(const MvnProblem& problem, double accuracy = 1e-6, std::uint64_t seed = 0,
                   const MvnOptions& options = {});

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace exk
