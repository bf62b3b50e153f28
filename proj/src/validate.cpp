#include "exk/validate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "exk/errors.hpp"
#include "exk/gauss.hpp"
#include "exk/mc.hpp"
#include "exk/mec.hpp"
#include "exk/rng.hpp"

namespace exk {

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.info_only || c.passed; });
}

namespace {

std::vector<Vector> random_points(const RectDomain& domain, int count, std::uint64_t seed) {
  KeyedStream stream(seed, 0x76616c);
  std::vector<Vector> pts;
  for (int i = 0; i < count; ++i) {
    Vector t(domain.dim());
    for (Index a = 0; a < t.size(); ++a) t(a) = domain.lower()(a) + stream.uniform() * domain.width(a);
    pts.push_back(std::move(t));
  }
  return pts;
}

ValidationCheck upper_bound(std::string suite, std::string name, double measured, double tol) {
  return {std::move(suite), std::move(name), measured, tol, measured <= tol, false, {}};
}

double rel_err(const Matrix& a, const Matrix& b) {
  return ((a - b).array().abs() / a.array().abs().max(1.0)).maxCoeff();
}

void hermite_suite(ValidationReport& report) {
  for (int k = 1; k <= 6; ++k) {
    for (double u : {0.5, 1.0, 2.0, 3.0}) {
      std::ostringstream name;
      name << "tail identity k=" << k << " u=" << u;
      report.checks.push_back(upper_bound("hermite", name.str(), hermite_tail_identity_check(k, u), 1e-8));
    }
  }
}

void lambda_suite(ValidationReport& report, const FieldModel& model, const std::vector<Vector>& pts) {
  double cov_err = 0.0;
  for (const auto& t : pts) {
    const double nu = model.variance(t);
    cov_err = std::max(cov_err, std::abs(model.covariance(t, t) - nu) / std::max(1.0, std::abs(nu)));
  }
  report.checks.push_back(upper_bound("lambda", "C(t,t) = nu(t)", cov_err, 1e-12));

  const Matrix lam = model.lambda();
  const double asym = (lam - lam.transpose()).cwiseAbs().maxCoeff();
  const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(lam, Eigen::EigenvaluesOnly).eigenvalues()(0);
  report.checks.push_back(upper_bound("lambda", "Lambda symmetric", asym, 1e-12));
  ValidationCheck pd{"lambda", "Lambda positive definite", min_eig, kLambdaRcondTol, min_eig > kLambdaRcondTol, false,
                     "measured is the minimum eigenvalue"};
  report.checks.push_back(pd);

  if (const auto* spectral = dynamic_cast<const SpectralSumField*>(&model)) {
    double err = (spectral->spectral_lambda() - lam).cwiseAbs().maxCoeff();
    for (const auto& t : pts) {
      err = std::max(err, (spectral->spectral_lambda_at(t) - model.lambda_at(t)).cwiseAbs().maxCoeff());
    }
    report.checks.push_back(upper_bound("lambda", "spectral moments vs variogram Hessian", err, 1e-10));
  }
}

void derivative_suite(ValidationReport& report, const FieldModel& model, const std::vector<Vector>& pts) {
  constexpr double h = 1e-5;
  const Index n = model.dim();
  double grad_err = 0.0, hess_err = 0.0, third_err = 0.0;
  bool has_third = false;
  for (const auto& t : pts) {
    Vector fd_grad(n);
    Matrix fd_hess(n, n);
    const auto third = model.third_variance(t);
    Tensor3 fd_third(n, Matrix(n, n));
    for (Index i = 0; i < n; ++i) {
      Vector tp = t, tm = t;
      tp(i) += h;
      tm(i) -= h;
      fd_grad(i) = (model.variance(tp) - model.variance(tm)) / (2 * h);
      fd_hess.col(i) = (model.grad_variance(tp) - model.grad_variance(tm)) / (2 * h);
      if (third) fd_third[i] = (model.hess_variance(tp) - model.hess_variance(tm)) / (2 * h);
    }
    grad_err = std::max(grad_err, rel_err(model.grad_variance(t), fd_grad));
    hess_err = std::max(hess_err, rel_err(model.hess_variance(t), fd_hess));
    if (third) {
      has_third = true;
      for (Index i = 0; i < n; ++i) third_err = std::max(third_err, rel_err((*third)[i], fd_third[i]));
    }
  }
  report.checks.push_back(upper_bound("derivatives", "grad nu vs central differences", grad_err, 1e-5));
  report.checks.push_back(upper_bound("derivatives", "Hess nu vs central differences", hess_err, 1e-5));
  if (has_third) {
    report.checks.push_back(upper_bound("derivatives", "third derivatives vs central differences", third_err, 1e-5));
  }
}

void conditioning_suite(ValidationReport& report, const FieldModel& model, const RectDomain& domain,
                        const std::vector<Vector>& pts) {
  ValidationCheck check{"conditioning", "gamma^2 <= theta^2 <= nu", 0.0, 1e-10, true, false, {}};
  try {
    for (const auto& face : enumerate_faces(domain)) {
      for (const auto& t : pts) {
        const auto cp = covariance_at_point(model, face, t);
        const double scale = std::max(1.0, cp.nu);
        check.measured = std::max({check.measured, (cp.gamma_sq - cp.theta_sq) / scale, (cp.theta_sq - cp.nu) / scale});
      }
    }
    check.passed = check.measured <= check.tolerance;
  } catch (const Error& e) {
    check.passed = false;
    check.measured = std::nan("");
    check.detail = e.what();
  }
  report.checks.push_back(check);
}

std::vector<std::uint8_t> canonical_mask(int which, int& rows, int& cols) {
  if (which == 0) {
    rows = cols = 5;
    return std::vector<std::uint8_t>(25, 1);
  }
  if (which == 1) {
    rows = cols = 3;
    std::vector<std::uint8_t> m(9, 1);
    m[4] = 0;
    return m;
  }
  rows = 2;
  cols = 5;
  return {1, 1, 0, 1, 1, 1, 1, 0, 1, 1};
}

void ec_suite(ValidationReport& report, int masks, std::uint64_t seed) {
  const long long expected[] = {1, 0, 2};
  const char* names[] = {"solid block", "ring", "two blocks"};
  for (int w = 0; w < 3; ++w) {
    int rows = 0, cols = 0;
    const auto mask = canonical_mask(w, rows, cols);
    const long long chi = cubical_ec(mask, {rows, cols}).chi;
    const long long oracle = ec_oracle_2d(mask, rows, cols);
    ValidationCheck c{"ec_oracle", names[w], static_cast<double>(chi), static_cast<double>(expected[w]),
                      chi == expected[w] && oracle == expected[w], false, {}};
    c.detail = "oracle " + std::to_string(oracle);
    report.checks.push_back(c);
  }
  KeyedStream stream(seed, 0x65636d);
  int mismatches = 0;
  for (int i = 0; i < masks; ++i) {
    const int rows = 1 + static_cast<int>(stream.uniform() * 20);
    const int cols = 1 + static_cast<int>(stream.uniform() * 20);
    const double density = stream.uniform();
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows) * cols);
    for (auto& v : mask) v = stream.uniform() < density ? 1 : 0;
    if (cubical_ec(mask, {rows, cols}).chi != ec_oracle_2d(mask, rows, cols)) ++mismatches;
  }
  report.checks.push_back(
      upper_bound("ec_oracle", std::to_string(masks) + " random masks up to 20x20", mismatches, 0.0));
}

void h2_suite(ValidationReport& report, const FieldModel& model, const RectDomain& domain, int grid) {
  const auto h2 = check_h2(model, domain, grid);
  ValidationCheck c{"h2", "min eigenvalue of Lambda - Lambda(t)", h2.min_eigenvalue, kH2Tol, h2.passed, false, {}};
  std::ostringstream at;
  at << "argmin (" << h2.argmin.transpose().format(Eigen::IOFormat(6, Eigen::DontAlignCols, ", ")) << ")";
  c.detail = at.str();
  report.checks.push_back(c);
}

void condition_suite(ValidationReport& report, const FieldModel& model, const RectDomain& domain) {
  ValidationCheck c{"condition", "no vanishing fixed-direction derivative at the maximum", 0.0, 0.0, true, true, {}};
  try {
    const auto cond = condition_check(model, domain);
    c.measured = static_cast<double>(cond.violations.size());
    c.passed = cond.satisfied;
    std::ostringstream d;
    d << "sigma_T^2 = " << cond.sigma_sq;
    for (const auto& v : cond.violations) d << "; nu_" << v.coordinate + 1 << " = 0 on face " << v.face.to_string();
    c.detail = d.str();
  } catch (const Error& e) {
    c.passed = false;
    c.detail = e.what();
  }
  report.checks.push_back(c);
}

}  // namespace

ValidationReport run_validation(const FieldModel& model, const RectDomain& domain, const ValidationOptions& options) {
  if (model.dim() != domain.dim()) throw ConfigError("model and domain dimensions differ");
  ValidationReport report;
  const auto pts = random_points(domain, options.random_points, options.seed);
  hermite_suite(report);
  lambda_suite(report, model, pts);
  derivative_suite(report, model, pts);
  conditioning_suite(report, model, domain, pts);
  ec_suite(report, options.ec_masks, options.seed);
  h2_suite(report, model, domain, options.h2_grid);
  condition_suite(report, model, domain);
  return report;
}

void write_report(const ValidationReport& report, std::ostream& out) {
  out << std::setprecision(6);
  for (const auto& c : report.checks) {
    const char* status = c.info_only ? "INFO" : (c.passed ? "PASS" : "FAIL");
    out << status << "  " << c.suite << ": " << c.name << "  measured=" << c.measured << " tol=" << c.tolerance;
    if (!c.detail.empty()) out << "  (" << c.detail << ")";
    out << "\n";
  }
  out << (report.passed() ? "validation passed" : "validation FAILED") << "\n";
}

}  // namespace exk
