#include "exk/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "exk/errors.hpp"

namespace exk {

// ---------------------------------------------------------------------------
// SpectralSumField

SpectralSumField::SpectralSumField(std::vector<SpectralAtom> atoms, double offset_var)
    : VariogramModel(offset_var), atoms_(std::move(atoms)), dim_(0) {
  if (atoms_.empty()) throw ConfigError("spectral_sum: at least one atom is required");
  if (!(offset_var >= 0.0)) throw ConfigError("spectral_sum: offset_var must be >= 0");
  dim_ = atoms_.front().freq.size();
  if (dim_ < 1) throw ConfigError("spectral_sum: empty frequency vector");
  for (std::size_t m = 0; m < atoms_.size(); ++m) {
    if (atoms_[m].freq.size() != dim_) {
      throw ConfigError("spectral_sum: atom " + std::to_string(m) + " has a frequency of the wrong length");
    }
    if (!(atoms_[m].weight > 0.0)) throw ConfigError("spectral_sum: atom weights must be > 0");
  }
}

double SpectralSumField::variogram(const Vector& h) const {
  double g = 0.0;
  for (const auto& a : atoms_) g += 2.0 * a.weight * (1.0 - std::cos(h.dot(a.freq)));
  return g;
}

Vector SpectralSumField::variogram_grad(const Vector& h) const {
  Vector grad = Vector::Zero(dim_);
  for (const auto& a : atoms_) grad += 2.0 * a.weight * std::sin(h.dot(a.freq)) * a.freq;
  return grad;
}

Matrix SpectralSumField::variogram_hess(const Vector& h) const {
  Matrix hess = Matrix::Zero(dim_, dim_);
  for (const auto& a : atoms_) hess += 2.0 * a.weight * std::cos(h.dot(a.freq)) * a.freq * a.freq.transpose();
  return hess;
}

std::optional<Tensor3> SpectralSumField::variogram_third(const Vector& h) const {
  Tensor3 third(dim_, Matrix::Zero(dim_, dim_));
  for (const auto& a : atoms_) {
    const double s = -2.0 * a.weight * std::sin(h.dot(a.freq));
    const Matrix outer = a.freq * a.freq.transpose();
    for (Index k = 0; k < dim_; ++k) third[k] += s * a.freq(k) * outer;
  }
  return third;
}

Matrix SpectralSumField::spectral_lambda() const {
  Matrix lam = Matrix::Zero(dim_, dim_);
  for (const auto& a : atoms_) lam += a.weight * a.freq * a.freq.transpose();
  return lam;
}

Matrix SpectralSumField::spectral_lambda_at(const Vector& t) const {
  Matrix lam = Matrix::Zero(dim_, dim_);
  for (const auto& a : atoms_) lam += a.weight * std::cos(t.dot(a.freq)) * a.freq * a.freq.transpose();
  return lam;
}

namespace {
std::vector<SpectralAtom> cosine_atoms() {
  return {{Vector::Unit(2, 0), 0.5}, {Vector::Unit(2, 1), 0.5}};
}
}  // namespace

CosineField::CosineField() : SpectralSumField(cosine_atoms(), 1.0) {}

// ---------------------------------------------------------------------------
// GaussianIncrementField

GaussianIncrementField::GaussianIncrementField(Index dim, double scale)
    : VariogramModel(0.0), dim_(dim), scale_(scale) {
  if (dim < 1) throw ConfigError("gaussian_increment: dim must be >= 1");
  if (!(scale > 0.0)) throw ConfigError("gaussian_increment: scale must be > 0");
}

double GaussianIncrementField::variogram(const Vector& h) const {
  return 2.0 * (1.0 - std::exp(-h.squaredNorm() / (scale_ * scale_)));
}

Vector GaussianIncrementField::variogram_grad(const Vector& h) const {
  const double l2 = scale_ * scale_;
  return (4.0 / l2) * std::exp(-h.squaredNorm() / l2) * h;
}

Matrix GaussianIncrementField::variogram_hess(const Vector& h) const {
  const double l2 = scale_ * scale_;
  const double e = std::exp(-h.squaredNorm() / l2);
  return (4.0 / l2) * e * (Matrix::Identity(dim_, dim_) - (2.0 / l2) * h * h.transpose());
}

std::optional<Tensor3> GaussianIncrementField::variogram_third(const Vector& h) const {
  const double l2 = scale_ * scale_;
  const double e = std::exp(-h.squaredNorm() / l2);
  const Matrix inner = Matrix::Identity(dim_, dim_) - (2.0 / l2) * h * h.transpose();
  Tensor3 third(dim_);
  for (Index k = 0; k < dim_; ++k) {
    Matrix d_inner = Matrix::Zero(dim_, dim_);
    d_inner.row(k) += h.transpose();
    d_inner.col(k) += h;
    third[k] = (4.0 / l2) * e * (-(2.0 * h(k) / l2) * inner - (2.0 / l2) * d_inner);
  }
  return third;
}

// ---------------------------------------------------------------------------
// Covariance machinery

Matrix CovarianceAtPoint::joint() const {
  const Index n = c.size();
  Matrix j(n + 1, n + 1);
  j(0, 0) = nu;
  j.block(1, 0, n, 1) = c;
  j.block(0, 1, 1, n) = c.transpose();
  j.block(1, 1, n, n) = lambda;
  return j;
}

namespace {

Matrix restrict(const Matrix& m, const std::vector<int>& idx) {
  const auto k = static_cast<Index>(idx.size());
  Matrix out(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) out(i, j) = m(idx[i], idx[j]);
  return out;
}

Vector restrict(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

std::string point_string(const Vector& t) {
  std::ostringstream out;
  out << "(";
  for (Index i = 0; i < t.size(); ++i) out << (i ? ", " : "") << t(i);
  out << ")";
  return out.str();
}

Eigen::LLT<Matrix> factor_lambda(const Matrix& lam, const char* what) {
  Eigen::LLT<Matrix> llt(lam);
  if (llt.info() != Eigen::Success || llt.rcond() < kLambdaRcondTol) {
    throw DegenerateModelError(std::string(what) + " is numerically singular");
  }
  return llt;
}

double clamp_variance(double v, double nu, const char* what, const Vector& t) {
  if (v < -kNegativeVarianceTol * std::max(1.0, std::abs(nu))) {
    std::ostringstream msg;
    msg << what << " = " << v << " < 0 at " << point_string(t) << ": model is inconsistent";
    throw ModelInconsistencyError(msg.str());
  }
  return std::max(v, 0.0);
}

}  // namespace

CovarianceAtPoint covariance_at_point(const FieldModel& model, const Face& face, const Vector& t) {
  CovarianceAtPoint out;
  out.t = t;
  out.face = face;
  out.nu = model.variance(t);
  out.c = 0.5 * model.grad_variance(t);
  out.lambda = model.lambda();
  out.lambda_t = model.lambda_at(t);
  out.lambda_face = restrict(out.lambda, face.sigma);
  out.lambda_face_t = restrict(out.lambda_t, face.sigma);

  if (face.dim() == 0) {
    out.theta_sq = out.nu;
  } else {
    const auto llt = factor_lambda(out.lambda_face, "Lambda_J");
    const Vector cj = restrict(out.c, face.sigma);
    out.theta_sq = clamp_variance(out.nu - cj.dot(llt.solve(cj)), out.nu, "theta^2", t);
  }

  const auto llt = factor_lambda(out.lambda, "Lambda");
  const Vector lam_inv_c = llt.solve(out.c);
  out.gamma_sq = clamp_variance(out.nu - out.c.dot(lam_inv_c), out.nu, "gamma^2", t);
  // (1, j+1) entry of the inverse joint covariance: -(Lambda^{-1} c)_j / gamma^2
  out.cvec = out.gamma_sq > 0.0 ? Vector(-lam_inv_c / out.gamma_sq) : Vector::Zero(out.c.size());
  return out;
}

CovarianceAtPoint covariance_at(const FieldModel& model, const RectDomain& domain, const Face& face,
                                const Vector& free_coords) {
  return covariance_at_point(model, face, embed_point(domain, face, free_coords));
}

double conditional_variance(const FieldModel& model, const Face& face, const Vector& t) {
  const double nu = model.variance(t);
  if (face.dim() == 0) return nu;
  const Vector cj = restrict(Vector(0.5 * model.grad_variance(t)), face.sigma);
  const auto llt = factor_lambda(restrict(model.lambda(), face.sigma), "Lambda_J");
  return clamp_variance(nu - cj.dot(llt.solve(cj)), nu, "theta^2", t);
}

// ---------------------------------------------------------------------------
// (H2) scan

H2Report check_h2(const FieldModel& model, const RectDomain& domain, int grid_per_axis) {
  if (grid_per_axis < 2) throw ConfigError("check_h2: grid_per_axis must be >= 2");
  const Index n = domain.dim();
  const Matrix lam = model.lambda();
  H2Report report;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  std::vector<int> idx(n, 0);
  Vector t(n);
  while (true) {
    for (Index i = 0; i < n; ++i) {
      t(i) = domain.lower()(i) + (idx[i] + 1) * domain.width(i) / (grid_per_axis + 1);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(lam - model.lambda_at(t), Eigen::EigenvaluesOnly);
    const double e = eig.eigenvalues()(0);
    if (e < report.min_eigenvalue) {
      report.min_eigenvalue = e;
      report.argmin = t;
    }
    Index i = 0;
    for (; i < n; ++i) {
      if (++idx[i] < grid_per_axis) break;
      idx[i] = 0;
    }
    if (i == n) break;
  }
  report.passed = report.min_eigenvalue >= kH2Tol;
  return report;
}

// ---------------------------------------------------------------------------
// Maximum variance

namespace {

Vector project(const RectDomain& domain, Vector x) {
  return x.cwiseMax(domain.lower()).cwiseMin(domain.upper());
}

Vector ascend(const FieldModel& model, const RectDomain& domain, Vector x, double grad_tol) {
  const Index n = domain.dim();
  for (int iter = 0; iter < 200; ++iter) {
    const Vector g = model.grad_variance(x);
    const Matrix h = model.hess_variance(x);
    std::vector<int> free;
    for (Index i = 0; i < n; ++i) {
      const bool pinned_low = x(i) <= domain.lower()(i) && g(i) <= 0.0;
      const bool pinned_high = x(i) >= domain.upper()(i) && g(i) >= 0.0;
      if (!pinned_low && !pinned_high) free.push_back(static_cast<int>(i));
    }
    if (free.empty()) break;
    const Vector gf = restrict(g, free);
    if (gf.lpNorm<Eigen::Infinity>() < grad_tol) break;
    const Matrix hf = restrict(h, free);
    Vector step_f;
    Eigen::LLT<Matrix> llt(-hf);
    if (llt.info() == Eigen::Success) {
      step_f = llt.solve(gf);
    } else {
      step_f = gf / std::max(1.0, hf.norm());
    }
    Vector step = Vector::Zero(n);
    for (std::size_t m = 0; m < free.size(); ++m) step(free[m]) = step_f(static_cast<Index>(m));
    const double base = model.variance(x);
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const Vector trial = project(domain, x + alpha * step);
      if (model.variance(trial) >= base && (trial - x).norm() > 0.0) {
        x = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return x;
}

}  // namespace

MaxVarianceResult max_variance(const FieldModel& model, const RectDomain& domain, const MaxVarianceOptions& options) {
  const Index n = domain.dim();
  int per_axis = std::max(2, options.grid_per_axis);
  while (per_axis > 2 && std::pow(static_cast<double>(per_axis), static_cast<double>(n)) > 2e6) --per_axis;

  std::vector<long long> strides(n, 1);
  long long total = 1;
  for (Index i = 0; i < n; ++i) {
    strides[i] = total;
    total *= per_axis;
  }
  auto point_of = [&](long long flat) {
    Vector t(n);
    for (Index i = 0; i < n; ++i) {
      const long long k = (flat / strides[i]) % per_axis;
      t(i) = domain.lower()(i) + static_cast<double>(k) * domain.width(i) / (per_axis - 1);
    }
    return t;
  };
  std::vector<double> values(total);
  for (long long f = 0; f < total; ++f) values[f] = model.variance(point_of(f));

  // discrete local maxima over the axis neighbours
  std::vector<long long> starts;
  for (long long f = 0; f < total; ++f) {
    bool is_max = true;
    for (Index i = 0; i < n && is_max; ++i) {
      const long long k = (f / strides[i]) % per_axis;
      if (k > 0 && values[f - strides[i]] > values[f]) is_max = false;
      if (k + 1 < per_axis && values[f + strides[i]] > values[f]) is_max = false;
    }
    if (is_max) starts.push_back(f);
  }
  std::stable_sort(starts.begin(), starts.end(), [&](long long a, long long b) { return values[a] > values[b]; });
  if (starts.size() > 64) starts.resize(64);

  double diameter = 0.0;
  for (Index i = 0; i < n; ++i) diameter = std::max(diameter, domain.width(i));
  constexpr double snap = 1e-9;

  struct Candidate {
    Vector t;
    double value;
  };
  std::vector<Candidate> refined;
  for (long long f : starts) {
    Vector t = ascend(model, domain, point_of(f), options.grad_tol);
    for (Index i = 0; i < n; ++i) {
      if (std::abs(t(i) - domain.lower()(i)) <= snap * domain.width(i)) t(i) = domain.lower()(i);
      if (std::abs(t(i) - domain.upper()(i)) <= snap * domain.width(i)) t(i) = domain.upper()(i);
    }
    const double v = model.variance(t);
    bool duplicate = false;
    for (auto& c : refined) {
      if ((c.t - t).norm() <= 1e-6 * diameter) {
        duplicate = true;
        if (v > c.value) c = {t, v};
        break;
      }
    }
    if (!duplicate) refined.push_back({t, v});
  }

  MaxVarianceResult result;
  const auto best = std::max_element(refined.begin(), refined.end(),
                                     [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
  result.sigma_sq = best->value;
  result.argmax = best->t;
  result.face = classify_point(domain, best->t);
  for (const auto& c : refined) {
    if (c.value >= result.sigma_sq - options.tie_tol) result.ties.push_back(c.t);
  }
  return result;
}

}  // namespace exk
