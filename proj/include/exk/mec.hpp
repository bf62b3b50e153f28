#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exk/field.hpp"
#include "exk/geometry.hpp"
#include "exk/quad.hpp"

namespace exk {

enum class Method { mu_approx, mean_ec, laplace };

std::string to_string(Method method);
/// Parses "mu_approx", "mean_ec" or "laplace"; throws ConfigError otherwise.
Method method_from_string(const std::string& name);

struct FaceContribution {
  Face face;
  double value = 0.0;
  double err_est = 0.0;
};

/// Per-face ledger of one level; faces appear in enumerate_faces order.
struct MecResult {
  double level = 0.0;
  Method method = Method::mean_ec;
  std::vector<FaceContribution> per_face;
  double total = 0.0;
  double err_est = 0.0;
  std::vector<std::string> warnings;
};

struct MecOptions {
  QuadSpec quad;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Vertex probabilities are computed to this accuracy relative to Psi(u / sqrt(nu)).
  double mvn_rel_accuracy = 1e-4;
  /// Cap on N for the full mean-EC integration.
  int max_mean_ec_dim = 3;
};

/// Below this conditional variance the Gaussian factor is taken as 0.
inline constexpr double kThetaFloor = 1e-14;

/// Principal term of E{M_u(J)} for a face of dimension k >= 1:
/// (2pi)^{-(k+1)/2} |Lambda_J|^{-1/2} int_J |Lambda_J - Lambda_J(t)| theta^{-k} H_{k-1}(u/theta) e^{-u^2/(2 theta^2)} dt.
QuadResult face_term_mu(const FieldModel& model, const RectDomain& domain, const Face& face, double u,
                        const QuadSpec& spec);

/// P(X(t) >= u, grad X(t) in E({t})) at a vertex.
QuadResult vertex_term(const FieldModel& model, const RectDomain& domain, const Face& vertex, double u,
                       std::uint64_t seed, double rel_accuracy = 1e-4);

/// Kac-Rice term of a face of dimension k >= 1 in the mean Euler characteristic;
/// nested integration over J, [u, inf) and E(J).
QuadResult face_term_mean_ec(const FieldModel& model, const RectDomain& domain, const Face& face, double u,
                             const QuadSpec& spec);

/// E{phi(A_u)}: vertex terms plus face_term_mean_ec over all faces of dimension >= 1.
MecResult mean_euler_characteristic(const FieldModel& model, const RectDomain& domain, double u,
                                    const MecOptions& options = {});

/// First approximation of P{sup X >= u}: sum over vertices of Psi(u / sqrt(nu)) plus face_term_mu.
MecResult excursion_prob_mu(const FieldModel& model, const RectDomain& domain, double u,
                            const MecOptions& options = {});

struct ConditionViolation {
  Face face;
  Vector point;
  int coordinate = 0;  // 0-based fixed coordinate with vanishing nu_j
};

struct ConditionReport {
  bool satisfied = true;
  double sigma_sq = 0.0;
  std::vector<Vector> maximizers;
  std::vector<ConditionViolation> violations;
};

/// Checks, at every point where nu is within 1e-6 of its maximum, that no fixed
/// coordinate of the containing face has |nu_j| < 1e-8.
ConditionReport condition_check(const FieldModel& model, const RectDomain& domain);

// ---------------------------------------------------------------------------
// Laplace closed forms

enum class LaplaceCase { corner_regular, face_critical, interior_critical };

std::string to_string(LaplaceCase c);

struct LaplaceInputs {
  Vector t0;
  Face face;
  double sigma_sq = 0.0;
  Matrix theta;  // k x k Hessian of tau on the host face at t0
  LaplaceCase classification = LaplaceCase::corner_regular;
};

/// Hessian of tau(t) = theta^2_{J,t} in the free coordinates of `face` at t0 by
/// central differences with the given step, symmetrized. t0 may lie on the
/// closure of the face; models are evaluated globally, so the stencil may leave it.
Matrix tau_hessian(const FieldModel& model, const Face& face, const Vector& t0, double step);

/// Same Hessian from the model's analytic third derivatives, if supplied.
std::optional<Matrix> tau_hessian_analytic(const FieldModel& model, const Face& face, const Vector& t0);

/// Locates the unique variance maximizer and classifies it. Throws NumericError
/// listing the candidates when the maximizer is not unique.
LaplaceInputs laplace_inputs(const FieldModel& model, const RectDomain& domain);

/// First-order Laplace approximation of P{sup X >= u}, with per-face terms in the ledger.
MecResult laplace_result(const FieldModel& model, const RectDomain& domain, double u, const LaplaceInputs& inputs,
                         std::uint64_t seed = 0);

double laplace_closed_form(const FieldModel& model, const RectDomain& domain, double u, const LaplaceInputs& inputs,
                           std::uint64_t seed = 0);

/// Dispatches on method; Laplace inputs are computed on the fly.
MecResult compute(Method method, const FieldModel& model, const RectDomain& domain, double u,
                  const MecOptions& options = {});

}  // namespace exk
