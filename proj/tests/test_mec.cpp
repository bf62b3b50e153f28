#include <doctest.h>

#include <cmath>
#include <numbers>

#include "exk/errors.hpp"
#include "exk/gauss.hpp"
#include "exk/mec.hpp"

using namespace exk;
using doctest::Approx;
using std::numbers::pi;

namespace {

RectDomain box(double b0, double b1) { return RectDomain(Vector::Zero(2), Vector{{b0, b1}}); }

double psi5(double u) { return gauss_tail(u / std::sqrt(5.0)); }

const Face kInterior{2, {0, 1}, {}, {}};
const Face kTopEdge{2, {0}, {1}, {1}};

/// nu(t) = 9 - |t - t0|^2 with no correlation between X and its gradient, so
/// tau equals nu on every face.
class QuadraticModel : public FieldModel {
 public:
  explicit QuadraticModel(Vector t0) : t0_(std::move(t0)) {}
  Index dim() const override { return t0_.size(); }
  std::string name() const override { return "quadratic"; }
  double variance(const Vector& t) const override { return 9.0 - (t - t0_).squaredNorm(); }
  double covariance(const Vector& t, const Vector& s) const override { return variance(t) + variance(s) - 9.0; }
  Vector grad_variance(const Vector&) const override { return Vector::Zero(dim()); }
  Matrix hess_variance(const Vector&) const override { return -2 * Matrix::Identity(dim(), dim()); }
  Matrix lambda() const override { return Matrix::Identity(dim(), dim()); }
  Matrix lambda_at(const Vector&) const override { return 0.5 * Matrix::Identity(dim(), dim()); }

 private:
  Vector t0_;
};

}  // namespace

TEST_CASE("method names") {
  for (auto m : {Method::mu_approx, Method::mean_ec, Method::laplace}) CHECK(method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(method_from_string("mc_only"), ConfigError);
}

TEST_CASE("first approximation on the corner domain") {
  CosineField f;
  // independent scipy quadrature of every face term, 1e-12 relative tolerances
  const auto r = excursion_prob_mu(f, box(pi / 2, pi / 2), 8.0);
  CHECK(r.total / gauss_tail(8.0 / std::sqrt(3.0)) == Approx(1.0441821006773928).epsilon(1e-6));
  const double r10 = excursion_prob_mu(f, box(pi / 2, pi / 2), 10.0).total / gauss_tail(10.0 / std::sqrt(3.0));
  const double r12 = excursion_prob_mu(f, box(pi / 2, pi / 2), 12.0).total / gauss_tail(12.0 / std::sqrt(3.0));
  CHECK(r12 - 1 < r10 - 1);
  CHECK(r10 - 1 < 0.0441821);
  CHECK(r12 > 1.0);
}

TEST_CASE("face_term_mu against the closed forms") {
  CosineField f;
  QuadSpec q;
  const auto ratio_edge = [&](double u) {
    return face_term_mu(f, box(1.5 * pi, pi / 2), kTopEdge, u, q).value / (std::sqrt(2.0) * gauss_tail(u / 2));
  };
  const auto ratio_int = [&](double u) {
    return face_term_mu(f, box(1.5 * pi, 1.5 * pi), kInterior, u, q).value / (2 * psi5(u));
  };
  CHECK(ratio_edge(8) == Approx(1.0).epsilon(0.05));
  CHECK(std::abs(ratio_edge(8) - 1) < std::abs(ratio_edge(5) - 1));
  CHECK(ratio_int(8) == Approx(1.0).epsilon(0.05));
  CHECK(std::abs(ratio_int(8) - 1) < std::abs(ratio_int(5) - 1));

  CHECK(face_term_mu(f, box(pi, pi), kInterior, 12, q).value < face_term_mu(f, box(pi, pi), kInterior, 8, q).value);
  for (const auto& face : enumerate_faces(box(pi, pi)))
    if (!face.is_vertex()) CHECK(face_term_mu(f, box(pi, pi), face, 20, q).value >= 0.0);
}

TEST_CASE("vertex terms") {
  CosineField f;
  const Face upper_right{2, {}, {0, 1}, {1, 1}};
  const auto v = vertex_term(f, box(pi, pi), upper_right, 3.0, 0);
  const double expected = 0.25 * psi5(3.0);
  CHECK(expected == Approx(0.022464061859874980).epsilon(1e-13));
  CHECK(std::abs(v.value - expected) <= 3 * v.err_est);

  // c = 0 at (pi, 0) with nu = 3
  const Face lower_right{2, {}, {0, 1}, {1, 0}};
  const auto w = vertex_term(f, box(pi, pi), lower_right, 2.5, 0);
  CHECK(std::abs(w.value - 0.25 * gauss_tail(2.5 / std::sqrt(3.0))) <= 3 * w.err_est);

  // 1e7 plain Monte Carlo draws (numpy)
  const auto m = vertex_term(f, box(pi / 2, pi / 2), upper_right, 3.0, 0);
  CHECK(std::abs(m.value - 0.0281154) <= 3 * std::sqrt(5.227e-5 * 5.227e-5 + m.err_est * m.err_est / 9));
}

TEST_CASE("mean Euler characteristic edge and total terms") {
  CosineField f;
  QuadSpec q;
  const double a = face_term_mean_ec(f, box(1.5 * pi, pi), kTopEdge, 8.0, q).value;
  CHECK(a / (std::sqrt(2.0) / 2 * psi5(8)) == Approx(1.0).epsilon(0.1));
  const double b = face_term_mean_ec(f, box(pi, pi), kTopEdge, 8.0, q).value;
  CHECK(b / (std::sqrt(2.0) / 4 * psi5(8)) == Approx(1.0).epsilon(0.1));

  const auto sq = mean_euler_characteristic(f, box(pi, pi), 8.0);
  CHECK(sq.total / ((3 + 2 * std::sqrt(2.0)) / 4 * psi5(8)) == Approx(1.0).epsilon(0.1));
  const auto rect = mean_euler_characteristic(f, box(1.5 * pi, pi), 8.0);
  CHECK(rect.total / ((2 + std::sqrt(2.0)) / 2 * psi5(8)) == Approx(1.0).epsilon(0.1));

  const auto r = mean_euler_characteristic(f, box(1.5 * pi, 1.5 * pi), 8.0);
  const auto m = excursion_prob_mu(f, box(1.5 * pi, 1.5 * pi), 8.0);
  CHECK(r.total == Approx(m.total).epsilon(0.02));
}

TEST_CASE("interior mean-EC term collapses to the first approximation") {
  CosineField f;
  QuadSpec q;
  q.rel_tol = 1e-9;
  for (double u : {3.0, 8.0}) {
    const double mec = face_term_mean_ec(f, box(1.5 * pi, 1.5 * pi), kInterior, u, q).value;
    const double mu = face_term_mu(f, box(1.5 * pi, 1.5 * pi), kInterior, u, q).value;
    CHECK(mec == Approx(mu).epsilon(1e-6));
  }
  GaussianIncrementField g(2, 1.0);
  const RectDomain d(Vector{{0.5, 0.5}}, Vector{{2.0, 2.0}});
  CHECK(face_term_mean_ec(g, d, kInterior, 3.0, q).value == Approx(face_term_mu(g, d, kInterior, 3.0, q).value).epsilon(1e-6));
}

TEST_CASE("ledger sums and thread independence") {
  CosineField f;
  MecOptions one, four;
  four.threads = 4;
  for (auto m : {Method::mu_approx, Method::mean_ec, Method::laplace}) {
    const auto a = compute(m, f, box(1.5 * pi, pi), 6.0, one);
    const auto b = compute(m, f, box(1.5 * pi, pi), 6.0, four);
    double sum = 0.0;
    for (const auto& c : a.per_face) sum += c.value;
    CHECK(std::abs(sum - a.total) <= 1e-12 * std::abs(a.total));
    REQUIRE(a.per_face.size() == b.per_face.size());
    CHECK(a.total == b.total);
    for (std::size_t i = 0; i < a.per_face.size(); ++i) CHECK(a.per_face[i].value == b.per_face[i].value);
  }
  CHECK(excursion_prob_mu(f, box(pi, pi), 5.0).per_face.size() == 9);
}

TEST_CASE("scaling covariance") {
  const double s = 1.7;
  SpectralSumField base({{Vector{{1.0, 0.2}}, 0.6}, {Vector{{-0.3, 1.1}}, 0.9}}, 0.4);
  SpectralSumField scaled({{Vector{{1.0, 0.2}}, 0.6 * s * s}, {Vector{{-0.3, 1.1}}, 0.9 * s * s}}, 0.4 * s * s);
  const RectDomain d(Vector{{0.3, 0.2}}, Vector{{2.5, 2.0}});
  MecOptions opt;
  opt.quad.rel_tol = 1e-9;
  for (auto m : {Method::mu_approx, Method::mean_ec}) {
    const double a = compute(m, base, d, 4.0, opt).total;
    const double b = compute(m, scaled, d, 4.0 * s, opt).total;
    CHECK(b == Approx(a).epsilon(1e-6));
  }
}

TEST_CASE("capability caps") {
  GaussianIncrementField g4(4, 1.0);
  const RectDomain d4(Vector::Constant(4, 0.5), Vector::Constant(4, 1.0));
  CHECK_THROWS_AS(mean_euler_characteristic(g4, d4, 3.0), CapabilityError);
  GaussianIncrementField g7(7, 1.0);
  const RectDomain d7(Vector::Constant(7, 0.5), Vector::Constant(7, 1.0));
  CHECK_THROWS_AS(excursion_prob_mu(g7, d7, 3.0), CapabilityError);
}

TEST_CASE("condition check") {
  CosineField f;
  CHECK(condition_check(f, box(pi / 2, pi / 2)).satisfied);
  const auto v = condition_check(f, box(pi, pi));
  CHECK_FALSE(v.satisfied);
  REQUIRE_FALSE(v.violations.empty());
  CHECK((v.violations.front().point - Vector{{pi, pi}}).norm() < 1e-6);
  CHECK(condition_check(f, box(1.5 * pi, 1.5 * pi)).satisfied);
}

TEST_CASE("tau Hessian") {
  CosineField f;
  const Matrix edge = tau_hessian(f, kTopEdge, Vector{{pi, pi / 2}}, 1e-4);
  REQUIRE(edge.rows() == 1);
  CHECK(std::abs(edge(0, 0) + 2.0) < 1e-5);
  const Matrix inner = tau_hessian(f, kInterior, Vector{{pi, pi}}, 1e-4);
  CHECK((inner + 2 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-5);
  const auto analytic = tau_hessian_analytic(f, kInterior, Vector{{pi, pi}});
  REQUIRE(analytic.has_value());
  CHECK((*analytic + 2 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  QuadraticModel quad(Vector{{0.4, 0.6}});
  CHECK((tau_hessian(quad, kInterior, Vector{{0.4, 0.6}}, 1e-3) + 2 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_FALSE(tau_hessian_analytic(quad, kInterior, Vector{{0.4, 0.6}}).has_value());
}

TEST_CASE("Laplace closed forms") {
  CosineField f;
  const auto corner = laplace_inputs(f, box(pi / 2, pi / 2));
  CHECK(corner.classification == LaplaceCase::corner_regular);
  CHECK(laplace_closed_form(f, box(pi / 2, pi / 2), 8, corner) == Approx(gauss_tail(8 / std::sqrt(3.0))).epsilon(1e-12));

  const auto edge = laplace_inputs(f, box(1.5 * pi, pi / 2));
  CHECK(edge.classification == LaplaceCase::face_critical);
  CHECK(edge.sigma_sq == Approx(4.0).epsilon(1e-12));
  CHECK(laplace_closed_form(f, box(1.5 * pi, pi / 2), 8, edge) ==
        Approx(std::sqrt(2.0) * gauss_tail(4.0)).epsilon(1e-6));

  const auto inner = laplace_inputs(f, box(1.5 * pi, 1.5 * pi));
  CHECK(inner.classification == LaplaceCase::interior_critical);
  CHECK(laplace_closed_form(f, box(1.5 * pi, 1.5 * pi), 8, inner) == Approx(2 * psi5(8)).epsilon(1e-6));

  const auto sq = laplace_inputs(f, box(pi, pi));
  const double expected = (3 + 2 * std::sqrt(2.0)) / 4 * psi5(8);
  CHECK(laplace_closed_form(f, box(pi, pi), 8, sq) == Approx(expected).epsilon(1e-4));
  const auto rect = laplace_inputs(f, box(1.5 * pi, pi));
  CHECK(laplace_closed_form(f, box(1.5 * pi, pi), 8, rect) == Approx((2 + std::sqrt(2.0)) / 2 * psi5(8)).epsilon(1e-4));

  // quadrature and Laplace approach each other as u grows
  for (double b1 : {pi / 2, 1.5 * pi}) {
    const RectDomain d = box(1.5 * pi, b1);
    const auto in = laplace_inputs(f, d);
    const auto gap = [&](double u) {
      return std::abs(excursion_prob_mu(f, d, u).total / laplace_closed_form(f, d, u, in) - 1);
    };
    CHECK(gap(8) < gap(5));
  }
}

TEST_CASE("Laplace rejects tied maximizers") {
  CosineField f;
  const RectDomain wide(Vector{{-pi - 1, 0.0}}, Vector{{pi + 1, 1.5 * pi}});
  CHECK_THROWS_AS(laplace_inputs(f, wide), NumericError);
}
