#include "exk/mec.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "exk/errors.hpp"
#include "exk/gauss.hpp"
#include "exk/parallel.hpp"
#include "exk/rng.hpp"

namespace exk {

std::string to_string(Method method) {
  switch (method) {
    case Method::mu_approx: return "mu_approx";
    case Method::mean_ec: return "mean_ec";
    case Method::laplace: return "laplace";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "mu_approx") return Method::mu_approx;
  if (name == "mean_ec") return Method::mean_ec;
  if (name == "laplace") return Method::laplace;
  throw ConfigError("unknown method '" + name + "' (expected mu_approx, mean_ec or laplace)");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<int> shifted(const std::vector<int>& idx, int by) {
  std::vector<int> out(idx);
  for (int& i : out) i += by;
  return out;
}

double lambda_face_det(const FieldModel& model, const Face& face) {
  const Matrix lam_j = model.lambda()(face.sigma, face.sigma);
  const double det = lam_j.determinant();
  Eigen::LLT<Matrix> llt(lam_j);
  if (llt.info() != Eigen::Success || llt.rcond() < kLambdaRcondTol || !(det > 0.0)) {
    throw DegenerateModelError("Lambda_J is singular on face " + face.to_string());
  }
  return det;
}

Matrix joint_covariance(const FieldModel& model, const Vector& t) {
  const Index n = t.size();
  Matrix joint(n + 1, n + 1);
  const Vector c = 0.5 * model.grad_variance(t);
  joint(0, 0) = model.variance(t);
  joint.block(1, 0, n, 1) = c;
  joint.block(0, 1, 1, n) = c.transpose();
  joint.block(1, 1, n, n) = model.lambda();
  return joint;
}

// Bounds of the outward cone for a vector of fixed-coordinate derivatives.
void cone_bounds(const OutwardCone& cone, Vector& lower, Vector& upper, Index offset) {
  for (std::size_t m = 0; m < cone.size(); ++m) {
    const Index i = offset + static_cast<Index>(m);
    lower(i) = cone.constraints[m].sign > 0 ? 0.0 : -kInf;
    upper(i) = cone.constraints[m].sign > 0 ? kInf : 0.0;
  }
}

template <typename F>
auto with_face_context(const Face& face, F&& body) {
  try {
    return body();
  } catch (const CapabilityError&) {
    throw;
  } catch (const NumericError& e) {
    throw NumericError("face " + face.to_string() + ": " + e.what());
  } catch (const DomainError& e) {
    throw NumericError("face " + face.to_string() + ": " + e.what());
  }
}

std::string quad_warning(const Face& face, const QuadResult& r) {
  std::ostringstream msg;
  msg.precision(6);
  msg << "face " << face.to_string() << ": tolerance not reached (value " << r.value << ", err_est " << r.err_est
      << ")";
  return msg.str();
}

void finish(MecResult& result) {
  result.total = 0.0;
  result.err_est = 0.0;
  for (const auto& f : result.per_face) {
    result.total += f.value;
    result.err_est += f.err_est;
  }
}

}  // namespace

QuadResult face_term_mu(const FieldModel& model, const RectDomain& domain, const Face& face, double u,
                        const QuadSpec& spec) {
  const int k = face.dim();
  if (k < 1) throw CapabilityError("face_term_mu: face " + face.to_string() + " is a vertex");
  const Matrix lam_j = model.lambda()(face.sigma, face.sigma);
  const double pref = std::pow(kTwoPi, -0.5 * (k + 1)) / std::sqrt(lambda_face_det(model, face));
  const auto integrand = [&](const Vector& s) {
    const Vector t = embed_point_unchecked(domain, face, s);
    const double th2 = conditional_variance(model, face, t);
    if (th2 < kThetaFloor) return 0.0;
    const double th = std::sqrt(th2);
    const double det = (lam_j - model.lambda_at(t)(face.sigma, face.sigma)).determinant();
    return det * std::pow(th, -k) * hermite(k - 1, u / th) * std::exp(-0.5 * u * u / th2);
  };
  QuadResult r = integrate_face(domain, face, integrand, spec);
  r.value *= pref;
  r.err_est *= pref;
  return r;
}

QuadResult vertex_term(const FieldModel& model, const RectDomain& domain, const Face& vertex, double u,
                       std::uint64_t seed, double rel_accuracy) {
  if (!vertex.is_vertex()) throw CapabilityError("vertex_term: face " + vertex.to_string() + " is not a vertex");
  const Vector t = embed_point(domain, vertex, Vector());
  const Index n = t.size();
  MvnProblem problem;
  problem.cov = joint_covariance(model, t);
  problem.lower.resize(n + 1);
  problem.upper.resize(n + 1);
  problem.lower(0) = u;
  problem.upper(0) = kInf;
  cone_bounds(outward_cone(vertex), problem.lower, problem.upper, 1);
  const double nu = problem.cov(0, 0);
  const double scale = nu > 0.0 ? gauss_tail(u / std::sqrt(nu)) : 1.0;
  const auto mvn = mvn_prob(problem, std::max(rel_accuracy * scale, 1e-300), seed);
  QuadResult r;
  r.value = mvn.p;
  r.err_est = mvn.err_est;
  r.converged = !mvn.warning;
  r.evaluations = 1;
  return r;
}

QuadResult face_term_mean_ec(const FieldModel& model, const RectDomain& domain, const Face& face, double u,
                             const QuadSpec& spec) {
  const int k = face.dim();
  if (k < 1) throw CapabilityError("face_term_mean_ec: face " + face.to_string() + " is a vertex");
  const OutwardCone cone = outward_cone(face);
  const Index m = static_cast<Index>(cone.size());
  if (1 + m > spec.max_cone_dim) {
    throw CapabilityError("face_term_mean_ec: nested dimension " + std::to_string(1 + m) + " on face " +
                          face.to_string() + " exceeds the cap of " + std::to_string(spec.max_cone_dim) +
                          "; use the Monte Carlo oracle instead");
  }
  const double pref = std::pow(kTwoPi, -0.5 * k) / std::sqrt(lambda_face_det(model, face));

  std::vector<int> targets{0};
  for (int j : face.fixed) targets.push_back(j + 1);
  const std::vector<int> conditioners = shifted(face.sigma, 1);

  QuadSpec inner_spec = spec;
  inner_spec.rel_tol = spec.rel_tol / 10.0;
  bool inner_converged = true;

  const auto integrand = [&](const Vector& s) {
    const Vector t = embed_point_unchecked(domain, face, s);
    const CovarianceAtPoint cp = covariance_at_point(model, face, t);
    if (cp.gamma_sq < kThetaFloor) return 0.0;
    const double det = (cp.lambda_face - cp.lambda_face_t).determinant();
    if (det == 0.0) return 0.0;

    const Matrix cov = condition_block(cp.joint(), targets, conditioners).cov;
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
      throw DegenerateModelError("conditional covariance of (X, fixed derivatives) is singular");
    }
    const Matrix& l = llt.matrixL();
    const double norm = std::pow(kTwoPi, -0.5 * static_cast<double>(m + 1)) / l.diagonal().prod();
    const double g = std::sqrt(cp.gamma_sq);
    const Vector c_fixed = cp.cvec(face.fixed);

    Vector z(m + 1);
    const auto density_term = [&](double x, const Vector& y) {
      z(0) = x;
      z.tail(m) = y;
      const double q = llt.matrixL().solve(z).squaredNorm();
      return hermite(k, x / g + g * c_fixed.dot(y)) * norm * std::exp(-0.5 * q);
    };
    const double sx = std::sqrt(cov(0, 0));
    std::vector<double> scales{sx * sx / std::max(u, sx)};
    for (Index j = 1; j <= m; ++j) scales.push_back(std::sqrt(cov(j, j)));

    const QuadResult inner = integrate_cone(cone, u, density_term, inner_spec, scales);
    if (!inner.converged) inner_converged = false;
    return det * std::pow(g, -k) * inner.value;
  };
  QuadResult r = integrate_face(domain, face, integrand, spec);
  r.value *= pref;
  r.err_est *= pref;
  r.converged = r.converged && inner_converged;
  return r;
}

MecResult mean_euler_characteristic(const FieldModel& model, const RectDomain& domain, double u,
                                    const MecOptions& options) {
  if (domain.dim() > options.max_mean_ec_dim) {
    throw CapabilityError("mean_ec: dimension " + std::to_string(domain.dim()) + " exceeds the cap of " +
                          std::to_string(options.max_mean_ec_dim));
  }
  if (model.dim() != domain.dim()) throw ConfigError("model and domain dimensions differ");
  const auto faces = enumerate_faces(domain);
  std::vector<QuadResult> terms(faces.size());
  parallel_for(static_cast<long long>(faces.size()), options.threads, [&](long long i) {
    const Face& face = faces[i];
    terms[i] = with_face_context(face, [&] {
      if (face.is_vertex()) {
        return vertex_term(model, domain, face, u, mix64(options.seed ^ (0x5bd1e995ULL * (i + 1))),
                           options.mvn_rel_accuracy);
      }
      return face_term_mean_ec(model, domain, face, u, options.quad);
    });
  });
  MecResult result;
  result.level = u;
  result.method = Method::mean_ec;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    result.per_face.push_back({faces[i], terms[i].value, terms[i].err_est});
    if (!terms[i].converged) result.warnings.push_back(quad_warning(faces[i], terms[i]));
  }
  finish(result);
  return result;
}

MecResult excursion_prob_mu(const FieldModel& model, const RectDomain& domain, double u, const MecOptions& options) {
  if (domain.dim() > 6) {
    throw CapabilityError("mu_approx: dimension " + std::to_string(domain.dim()) + " exceeds the cap of 6");
  }
  if (model.dim() != domain.dim()) throw ConfigError("model and domain dimensions differ");
  const auto faces = enumerate_faces(domain);
  std::vector<QuadResult> terms(faces.size());
  parallel_for(static_cast<long long>(faces.size()), options.threads, [&](long long i) {
    const Face& face = faces[i];
    terms[i] = with_face_context(face, [&] {
      if (face.is_vertex()) {
        const double nu = model.variance(embed_point(domain, face, Vector()));
        QuadResult r;
        r.value = nu > 0.0 ? gauss_tail(u / std::sqrt(nu)) : (u <= 0.0 ? 1.0 : 0.0);
        return r;
      }
      return face_term_mu(model, domain, face, u, options.quad);
    });
  });
  MecResult result;
  result.level = u;
  result.method = Method::mu_approx;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    result.per_face.push_back({faces[i], terms[i].value, terms[i].err_est});
    if (!terms[i].converged) result.warnings.push_back(quad_warning(faces[i], terms[i]));
  }
  finish(result);
  return result;
}

ConditionReport condition_check(const FieldModel& model, const RectDomain& domain) {
  MaxVarianceOptions opts;
  opts.tie_tol = 1e-6;
  const auto mv = max_variance(model, domain, opts);
  ConditionReport report;
  report.sigma_sq = mv.sigma_sq;
  report.maximizers = mv.ties;
  for (const Vector& t : mv.ties) {
    const Face face = classify_point(domain, t, 1e-9);
    const Vector grad = model.grad_variance(t);
    for (int j : face.fixed) {
      if (std::abs(grad(j)) < 1e-8) report.violations.push_back({face, t, j});
    }
  }
  report.satisfied = report.violations.empty();
  return report;
}

// ---------------------------------------------------------------------------
// Laplace

std::string to_string(LaplaceCase c) {
  switch (c) {
    case LaplaceCase::corner_regular: return "corner-regular";
    case LaplaceCase::face_critical: return "face-critical";
    case LaplaceCase::interior_critical: return "interior-critical";
  }
  return "unknown";
}

namespace {

Matrix tau_hessian_steps(const FieldModel& model, const Face& face, const Vector& t0, const Vector& steps) {
  const int k = face.dim();
  for (int i = 0; i < k; ++i) {
    const int a = face.sigma[i];
    const double h = steps(i);
    if (!(h > 0.0) || t0(a) + h == t0(a) || t0(a) - h == t0(a)) {
      throw NumericError("tau_hessian: step " + std::to_string(h) + " underflows at coordinate " +
                         std::to_string(a + 1));
    }
  }
  const auto tau = [&](const Vector& t) { return conditional_variance(model, face, t); };
  Matrix hess(k, k);
  const double f0 = tau(t0);
  for (int i = 0; i < k; ++i) {
    const int a = face.sigma[i];
    const double hi = steps(i);
    Vector tp = t0, tm = t0;
    tp(a) += hi;
    tm(a) -= hi;
    hess(i, i) = (tau(tp) - 2.0 * f0 + tau(tm)) / (hi * hi);
    for (int j = i + 1; j < k; ++j) {
      const int b = face.sigma[j];
      const double hj = steps(j);
      Vector pp = t0, pm = t0, mp = t0, mm = t0;
      pp(a) += hi, pp(b) += hj;
      pm(a) += hi, pm(b) -= hj;
      mp(a) -= hi, mp(b) += hj;
      mm(a) -= hi, mm(b) -= hj;
      hess(i, j) = hess(j, i) = (tau(pp) - tau(pm) - tau(mp) + tau(mm)) / (4.0 * hi * hj);
    }
  }
  return 0.5 * (hess + hess.transpose());
}

Matrix theta_for(const FieldModel& model, const RectDomain& domain, const Face& face, const Vector& t0) {
  if (auto analytic = tau_hessian_analytic(model, face, t0)) return *analytic;
  Vector steps(face.dim());
  for (int i = 0; i < face.dim(); ++i) steps(i) = 1e-4 * domain.width(face.sigma[i]);
  return tau_hessian_steps(model, face, t0, steps);
}

void require_negative_definite(const Matrix& theta, const Face& face) {
  if (theta.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(theta, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().maxCoeff() < 0.0)) {
    std::ostringstream msg;
    msg << "Theta on face " << face.to_string() << " is not negative definite (max eigenvalue "
        << eig.eigenvalues().maxCoeff() << ")";
    throw NumericError(msg.str());
  }
}

// 2^{k/2} |Lambda_J - Lambda_J(t0)| / (|Lambda_J|^{1/2} |-Theta|^{1/2})
double laplace_factor(const FieldModel& model, const Face& face, const Vector& t0, const Matrix& theta) {
  const int k = face.dim();
  if (k == 0) return 1.0;
  const double gap = (model.lambda() - model.lambda_at(t0))(face.sigma, face.sigma).determinant();
  return std::pow(2.0, 0.5 * k) * gap / (std::sqrt(lambda_face_det(model, face)) * std::sqrt((-theta).determinant()));
}

// P{fixed derivatives in E(J) | grad_J X(t0) = 0}
double fixed_orthant_prob(const FieldModel& model, const Face& face, const Vector& t0, std::uint64_t seed) {
  if (face.is_interior()) return 1.0;
  const Matrix cov = condition_block(joint_covariance(model, t0), shifted(face.fixed, 1), shifted(face.sigma, 1)).cov;
  const Index m = cov.rows();
  MvnProblem problem{cov, Vector(m), Vector(m), {}};
  cone_bounds(outward_cone(face), problem.lower, problem.upper, 0);
  return mvn_prob(problem, 1e-6, seed).p;
}

}  // namespace

Matrix tau_hessian(const FieldModel& model, const Face& face, const Vector& t0, double step) {
  return tau_hessian_steps(model, face, t0, Vector::Constant(face.dim(), step));
}

std::optional<Matrix> tau_hessian_analytic(const FieldModel& model, const Face& face, const Vector& t0) {
  const auto third = model.third_variance(t0);
  if (!third) return std::nullopt;
  const int k = face.dim();
  const auto& sig = face.sigma;
  const Eigen::LLT<Matrix> llt(model.lambda()(sig, sig));
  const Vector c = 0.5 * model.grad_variance(t0)(sig);
  const Matrix hess = model.hess_variance(t0);
  const Vector lam_inv_c = llt.solve(c);
  // d_i c_J = Hess(sig, i) / 2, d_ij c_J = third(sig, i, j) / 2
  const Matrix dc = 0.5 * hess(sig, sig);
  const Matrix lam_inv_dc = llt.solve(dc);
  Matrix out(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      Vector d2c(k);
      for (int r = 0; r < k; ++r) d2c(r) = 0.5 * (*third)[sig[j]](sig[r], sig[i]);
      out(i, j) = hess(sig[i], sig[j]) - 2.0 * dc.col(j).dot(lam_inv_dc.col(i)) - 2.0 * lam_inv_c.dot(d2c);
    }
  }
  return Matrix(0.5 * (out + out.transpose()));
}

LaplaceInputs laplace_inputs(const FieldModel& model, const RectDomain& domain) {
  const auto mv = max_variance(model, domain);
  if (mv.ties.size() > 1) {
    std::ostringstream msg;
    msg << "laplace: the variance maximizer is not unique; candidates:";
    for (const auto& t : mv.ties) {
      msg << " (";
      for (Index i = 0; i < t.size(); ++i) msg << (i ? ", " : "") << t(i);
      msg << ")";
    }
    throw NumericError(msg.str());
  }
  LaplaceInputs in;
  in.t0 = mv.argmax;
  in.face = mv.face;
  in.sigma_sq = mv.sigma_sq;
  if (in.face.is_interior()) {
    in.classification = LaplaceCase::interior_critical;
  } else {
    const Vector grad = model.grad_variance(in.t0);
    bool all_nonzero = true;
    for (int j : in.face.fixed) all_nonzero = all_nonzero && std::abs(grad(j)) > 1e-8;
    in.classification = in.face.is_vertex() && all_nonzero ? LaplaceCase::corner_regular : LaplaceCase::face_critical;
  }
  in.theta = in.face.dim() > 0 ? theta_for(model, domain, in.face, in.t0) : Matrix(0, 0);
  return in;
}

MecResult laplace_result(const FieldModel& model, const RectDomain& domain, double u, const LaplaceInputs& in,
                         std::uint64_t seed) {
  MecResult result;
  result.level = u;
  result.method = Method::laplace;
  const auto faces = enumerate_faces(domain);
  for (const auto& f : faces) result.per_face.push_back({f, 0.0, 0.0});
  const auto add = [&](const Face& face, double value) {
    for (auto& entry : result.per_face)
      if (entry.face == face) entry.value += value;
  };

  const double psi = gauss_tail(u / std::sqrt(in.sigma_sq));
  const Face& host = in.face;
  require_negative_definite(in.theta, host);

  switch (in.classification) {
    case LaplaceCase::corner_regular:
      add(host, psi);
      break;
    case LaplaceCase::interior_critical:
      add(host, laplace_factor(model, host, in.t0, in.theta) * psi);
      break;
    case LaplaceCase::face_critical: {
      const Vector grad = model.grad_variance(in.t0);
      int vanishing = 0;
      for (int j : host.fixed) vanishing += std::abs(grad(j)) <= 1e-8 ? 1 : 0;
      if (vanishing == 0) {
        add(host, laplace_factor(model, host, in.t0, in.theta) * psi);
        break;
      }
      if (vanishing != static_cast<int>(host.fixed.size())) {
        throw CapabilityError("laplace: the maximizer on face " + host.to_string() +
                              " has both vanishing and non-vanishing fixed-direction derivatives of nu");
      }
      add(host, laplace_factor(model, host, in.t0, in.theta) * psi * fixed_orthant_prob(model, host, in.t0, seed));
      for (std::size_t i = 0; i < faces.size(); ++i) {
        const Face& outer = faces[i];
        if (outer.dim() <= host.dim() || !face_closure_contains(outer, host)) continue;
        const Matrix theta = theta_for(model, domain, outer, in.t0);
        require_negative_definite(theta, outer);
        // Z: the coordinates free on the outer face but fixed on the host, Cov Z = -Theta restricted.
        std::vector<int> pos;
        std::vector<int> coords;
        for (int r = 0; r < outer.dim(); ++r) {
          if (host.epsilon_of(outer.sigma[r]) >= 0) {
            pos.push_back(r);
            coords.push_back(outer.sigma[r]);
          }
        }
        const Index m = static_cast<Index>(pos.size());
        MvnProblem problem{-theta(pos, pos), Vector(m), Vector(m), {}};
        for (Index r = 0; r < m; ++r) {
          const bool upper_side = host.epsilon_of(coords[r]) == 1;
          problem.lower(r) = upper_side ? -kInf : 0.0;
          problem.upper(r) = upper_side ? 0.0 : kInf;
        }
        const double p_z = mvn_prob(problem, 1e-6, mix64(seed + i)).p;
        add(outer, laplace_factor(model, outer, in.t0, theta) * psi * p_z *
                       fixed_orthant_prob(model, outer, in.t0, mix64(seed ^ i)));
      }
      break;
    }
  }
  finish(result);
  return result;
}

double laplace_closed_form(const FieldModel& model, const RectDomain& domain, double u, const LaplaceInputs& inputs,
                           std::uint64_t seed) {
  return laplace_result(model, domain, u, inputs, seed).total;
}

MecResult compute(Method method, const FieldModel& model, const RectDomain& domain, double u,
                  const MecOptions& options) {
  switch (method) {
    case Method::mu_approx: return excursion_prob_mu(model, domain, u, options);
    case Method::mean_ec: return mean_euler_characteristic(model, domain, u, options);
    case Method::laplace: return laplace_result(model, domain, u, laplace_inputs(model, domain), options.seed);
  }
  throw ConfigError("unknown method");
}

}  // namespace exk
