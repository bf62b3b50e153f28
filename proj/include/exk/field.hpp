#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "exk/geometry.hpp"
#include "exk/types.hpp"

namespace exk {

/// Slices of a symmetric rank-3 tensor: third[k](i, j) = d^3 f / dt_i dt_j dt_k.
using Tensor3 = std::vector<Matrix>;

/// Second-order description of a centered Gaussian field on R^N with stationary
/// increments. Implementations are immutable and may be shared across threads.
class FieldModel {
 public:
  virtual ~FieldModel() = default;

  virtual Index dim() const = 0;
  virtual std::string name() const = 0;

  /// nu(t) = Var X(t)
  virtual double variance(const Vector& t) const = 0;
  virtual double covariance(const Vector& t, const Vector& s) const = 0;
  virtual Vector grad_variance(const Vector& t) const = 0;
  virtual Matrix hess_variance(const Vector& t) const = 0;
  /// Cov(grad X(t)), constant in t.
  virtual Matrix lambda() const = 0;
  /// Lambda(t), with Lambda(t) - Lambda = E{X(t) Hess X(t)}.
  virtual Matrix lambda_at(const Vector& t) const = 0;
  /// Third derivatives of nu, when available analytically.
  virtual std::optional<Tensor3> third_variance(const Vector&) const { return std::nullopt; }
};

/// Model specified by a variogram g and an independent offset variance s0^2:
/// nu = s0^2 + g, C(t,s) = s0^2 + (g(t) + g(s) - g(t-s)) / 2,
/// Lambda = Hess g(0) / 2, Lambda(t) = Hess g(t) / 2.
class VariogramModel : public FieldModel {
 public:
  explicit VariogramModel(double offset_var) : offset_var_(offset_var) {}

  double offset_var() const { return offset_var_; }

  virtual double variogram(const Vector& h) const = 0;
  virtual Vector variogram_grad(const Vector& h) const = 0;
  virtual Matrix variogram_hess(const Vector& h) const = 0;
  virtual std::optional<Tensor3> variogram_third(const Vector&) const { return std::nullopt; }

  double variance(const Vector& t) const override { return offset_var_ + variogram(t); }
  double covariance(const Vector& t, const Vector& s) const override {
    return offset_var_ + 0.5 * (variogram(t) + variogram(s) - variogram(t - s));
  }
  Vector grad_variance(const Vector& t) const override { return variogram_grad(t); }
  Matrix hess_variance(const Vector& t) const override { return variogram_hess(t); }
  Matrix lambda() const override { return 0.5 * variogram_hess(Vector::Zero(dim())); }
  Matrix lambda_at(const Vector& t) const override { return 0.5 * variogram_hess(t); }
  std::optional<Tensor3> third_variance(const Vector& t) const override { return variogram_third(t); }

 private:
  double offset_var_;
};

struct SpectralAtom {
  Vector freq;
  double weight;
};

/// Finite spectral sum: F puts mass w/2 at +-lambda for each atom, so
/// g(h) = 2 sum w (1 - cos<h, lambda>). Exactly simulatable:
/// X(t) = s0 xi0 + sum sqrt(w) [xi (cos<t,lambda> - 1) + xi' sin<t,lambda>].
/// Infinitely differentiable, so C^2 sample paths and the Holder condition hold.
class SpectralSumField : public VariogramModel {
 public:
  SpectralSumField(std::vector<SpectralAtom> atoms, double offset_var);

  Index dim() const override { return dim_; }
  std::string name() const override { return "spectral_sum"; }
  const std::vector<SpectralAtom>& atoms() const { return atoms_; }

  double variogram(const Vector& h) const override;
  Vector variogram_grad(const Vector& h) const override;
  Matrix variogram_hess(const Vector& h) const override;
  std::optional<Tensor3> variogram_third(const Vector& h) const override;

  /// Lambda and Lambda(t) from the spectral moments sum w lambda lambda^T (cos<t,lambda>).
  Matrix spectral_lambda() const;
  Matrix spectral_lambda_at(const Vector& t) const;

 private:
  std::vector<SpectralAtom> atoms_;
  Index dim_;
};

/// X(t) = xi0 + Z(t) - Z(0) with Z the unit-variance cosine field on R^2:
/// nu(t) = 3 - cos t1 - cos t2, Lambda = I/2. X_12 vanishes identically, a
/// degeneracy the excursion formulas tolerate.
class CosineField : public SpectralSumField {
 public:
  CosineField();
  std::string name() const override { return "cosine"; }
};

/// X = Y - Y(0) for stationary Y with correlation exp(-|h/l|^2):
/// g(h) = 2 (1 - exp(-|h/l|^2)), no offset. Lambda - Lambda(t) is positive
/// definite away from the origin since the spectral density is Gaussian.
class GaussianIncrementField : public VariogramModel {
 public:
  GaussianIncrementField(Index dim, double scale);

  Index dim() const override { return dim_; }
  std::string name() const override { return "gaussian_increment"; }
  double scale() const { return scale_; }

  double variogram(const Vector& h) const override;
  Vector variogram_grad(const Vector& h) const override;
  Matrix variogram_hess(const Vector& h) const override;
  std::optional<Tensor3> variogram_third(const Vector& h) const override;

 private:
  Index dim_;
  double scale_;
};

/// Covariance quantities of (X(t), grad X(t)) at one point of one face.
struct CovarianceAtPoint {
  Vector t;
  Face face;
  double nu = 0.0;
  Vector c;  // E{X(t) grad X(t)} = grad nu / 2
  Matrix lambda;
  Matrix lambda_t;
  Matrix lambda_face;    // Lambda_J
  Matrix lambda_face_t;  // Lambda_J(t)
  double theta_sq = 0.0;  // Var(X | grad_J X)
  double gamma_sq = 0.0;  // Var(X | grad X)
  Vector cvec;            // C_j(t): first row of Cov(X, grad X)^{-1}, entries 1..N

  /// Cov of (X, X_1, ..., X_N).
  Matrix joint() const;
};

/// Conditional-variance thresholds.
inline constexpr double kNegativeVarianceTol = 1e-10;
inline constexpr double kLambdaRcondTol = 1e-12;

/// Evaluates the covariance machinery at an arbitrary point t for `face`
/// (t need not lie in the open face).
CovarianceAtPoint covariance_at_point(const FieldModel& model, const Face& face, const Vector& t);

/// Same, with t given by free coordinates of the open face.
CovarianceAtPoint covariance_at(const FieldModel& model, const RectDomain& domain, const Face& face,
                                const Vector& free_coords);

/// theta^2_{J,t} only.
double conditional_variance(const FieldModel& model, const Face& face, const Vector& t);

struct H2Report {
  double min_eigenvalue = 0.0;
  Vector argmin;
  bool passed = false;
};

inline constexpr double kH2Tol = 1e-10;

/// Minimum eigenvalue of Lambda - Lambda(t) over a uniform grid of interior points.
H2Report check_h2(const FieldModel& model, const RectDomain& domain, int grid_per_axis);

struct MaxVarianceResult {
  double sigma_sq = 0.0;
  Vector argmax;
  Face face;
  std::vector<Vector> ties;  // every distinct maximizer, argmax included
};

struct MaxVarianceOptions {
  int grid_per_axis = 64;
  double grad_tol = 1e-10;
  double tie_tol = 1e-8;
};

/// Grid scan followed by projected Newton ascent on the box; the maximizer is
/// classified into the open face containing it.
MaxVarianceResult max_variance(const FieldModel& model, const RectDomain& domain, const MaxVarianceOptions& options = {});

}  // namespace exk
