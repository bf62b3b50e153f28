#include "exk/gauss.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>

#include "exk/errors.hpp"
#include "exk/quad.hpp"

namespace exk {

double normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double normal_upper_quantile(double q) {
  if (q <= 0.0) return kInf;
  if (q >= 1.0) return -kInf;
  return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q);
}

double hermite_tail_identity_check(int k, double u) {
  QuadSpec spec;
  spec.rel_tol = 1e-13;
  spec.max_subdivisions = 20;
  const auto lhs = integrate_tail(u, [k](double x) { return hermite(k, x) * std::exp(-0.5 * x * x); }, spec);
  const double rhs = hermite(k - 1, u) * std::exp(-0.5 * u * u);
  return std::abs(lhs.value - rhs);
}

CondBlock condition_block(const Matrix& joint_cov, const std::vector<int>& targets,
                          const std::vector<int>& conditioners) {
  const auto nt = static_cast<Index>(targets.size());
  const auto nc = static_cast<Index>(conditioners.size());
  Matrix s_tt(nt, nt), s_tc(nt, nc), s_cc(nc, nc);
  for (Index i = 0; i < nt; ++i) {
    for (Index j = 0; j < nt; ++j) s_tt(i, j) = joint_cov(targets[i], targets[j]);
    for (Index j = 0; j < nc; ++j) s_tc(i, j) = joint_cov(targets[i], conditioners[j]);
  }
  for (Index i = 0; i < nc; ++i)
    for (Index j = 0; j < nc; ++j) s_cc(i, j) = joint_cov(conditioners[i], conditioners[j]);

  CondBlock out;
  if (nc == 0) {
    out.cov = s_tt;
    out.coeffs = Matrix::Zero(nt, 0);
    return out;
  }
  Eigen::LLT<Matrix> llt(s_cc);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
    throw DegenerateModelError("condition: conditioner block is singular (rcond " +
                               std::to_string(llt.info() == Eigen::Success ? llt.rcond() : 0.0) + ")");
  }
  out.coeffs = llt.solve(s_tc.transpose()).transpose();
  out.cov = s_tt - out.coeffs * s_tc.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

CondGaussian condition(const Matrix& joint_cov, int target, const std::vector<int>& conditioners) {
  const auto block = condition_block(joint_cov, {target}, conditioners);
  CondGaussian out;
  out.joint_cov = joint_cov;
  out.target = target;
  out.conditioners = conditioners;
  out.mean_coeffs = block.coeffs.row(0).transpose();
  out.cond_variance = block.cov(0, 0);
  return out;
}

}  // namespace exk
