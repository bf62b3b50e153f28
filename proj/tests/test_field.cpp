#include <doctest.h>

#include <cmath>
#include <numbers>

#include "exk/errors.hpp"
#include "exk/field.hpp"
#include "exk/field_io.hpp"
#include "exk/gauss.hpp"
#include "exk/rng.hpp"

using namespace exk;
using doctest::Approx;
using std::numbers::pi;

namespace {

RectDomain box(double a0, double b0, double a1, double b1) { return RectDomain(Vector{{a0, a1}}, Vector{{b0, b1}}); }

Vector pt(double a, double b) { return Vector{{a, b}}; }

}  // namespace

TEST_CASE("cosine field closed forms") {
  CosineField f;
  CHECK(f.dim() == 2);
  CHECK((f.lambda() - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
  KeyedStream rng(1, 2);
  for (int i = 0; i < 50; ++i) {
    const Vector t = pt(2 * pi * rng.uniform() - pi, 2 * pi * rng.uniform() - pi);
    CHECK(f.variance(t) == Approx(3 - std::cos(t(0)) - std::cos(t(1))).epsilon(1e-14));
    const Matrix diff = f.lambda() - f.lambda_at(t);
    CHECK(diff(0, 0) == Approx(0.5 * (1 - std::cos(t(0)))).scale(1.0).epsilon(1e-14));
    CHECK(diff(1, 1) == Approx(0.5 * (1 - std::cos(t(1)))).scale(1.0).epsilon(1e-14));
    CHECK(std::abs(diff(0, 1)) < 1e-15);
    const Vector s = pt(rng.uniform() * 3, rng.uniform() * 3);
    const double cts = 2 + 0.5 * (std::cos(t(0) - s(0)) - std::cos(t(0)) - std::cos(s(0)) + std::cos(t(1) - s(1)) -
                                  std::cos(t(1)) - std::cos(s(1)));
    CHECK(f.covariance(t, s) == Approx(cts).epsilon(1e-13));
    CHECK(f.covariance(t, t) == Approx(f.variance(t)).epsilon(1e-14));
  }
}

TEST_CASE("spectral moments agree with the variogram Hessian") {
  SpectralSumField f({{Vector{{1.0, 0.3, -0.2}}, 0.7}, {Vector{{0.0, 2.0, 0.5}}, 0.2}, {Vector{{-0.4, 0.1, 1.5}}, 1.1}},
                     0.5);
  CHECK((f.spectral_lambda() - f.lambda()).cwiseAbs().maxCoeff() < 1e-13);
  const Vector t{{0.3, -1.2, 2.0}};
  CHECK((f.spectral_lambda_at(t) - f.lambda_at(t)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(f.variance(Vector::Zero(3)) == Approx(0.5));
}

TEST_CASE("analytic derivatives match central differences") {
  SpectralSumField s({{Vector{{1.0, 0.3}}, 0.7}, {Vector{{-0.4, 1.5}}, 1.1}}, 0.2);
  GaussianIncrementField g(2, 1.3);
  for (const FieldModel* m : std::initializer_list<const FieldModel*>{&s, &g}) {
    const Vector t = pt(0.7, -0.4);
    const double h = 1e-5;
    const auto third = m->third_variance(t);
    REQUIRE(third.has_value());
    for (Index i = 0; i < 2; ++i) {
      Vector tp = t, tm = t;
      tp(i) += h;
      tm(i) -= h;
      CHECK(m->grad_variance(t)(i) == Approx((m->variance(tp) - m->variance(tm)) / (2 * h)).epsilon(1e-8));
      const Vector hcol = (m->grad_variance(tp) - m->grad_variance(tm)) / (2 * h);
      CHECK((m->hess_variance(t).col(i) - hcol).cwiseAbs().maxCoeff() < 1e-8);
      const Matrix tcol = (m->hess_variance(tp) - m->hess_variance(tm)) / (2 * h);
      CHECK(((*third)[i] - tcol).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("gaussian increment field closed forms") {
  GaussianIncrementField g(2, 1.0);
  CHECK((g.lambda() - 2 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  const Vector t = pt(0.4, 0.9);
  const double e = std::exp(-t.squaredNorm());
  Matrix expected(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) expected(i, j) = e * (2.0 * (i == j) - 4 * t(i) * t(j));
  CHECK((g.lambda_at(t) - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(g.variance(t) == Approx(2 * (1 - e)));
  CHECK(check_h2(g, box(0.5, 2, 0.5, 2), 25).passed);
}

TEST_CASE("covariance_at examples") {
  CosineField f;
  const RectDomain sq = box(0, 2 * pi, 0, 2 * pi);
  Face interior{2, {0, 1}, {}, {}};
  const auto at_max = covariance_at(f, sq, interior, pt(pi, pi));
  CHECK(at_max.nu == Approx(5.0));
  CHECK(at_max.c.norm() < 1e-15);
  CHECK(at_max.gamma_sq == Approx(5.0));
  CHECK(at_max.cvec.norm() < 1e-15);

  const double t1 = 1.1;
  const RectDomain strip = box(0, 1.5 * pi, 0, pi / 2);
  Face top{2, {0}, {1}, {1}};
  const auto e = covariance_at(f, strip, top, Vector{{t1}});
  CHECK(e.theta_sq == Approx(3 - std::cos(t1) - 0.5 * std::sin(t1) * std::sin(t1)).epsilon(1e-13));
  CHECK(e.lambda_face.rows() == 1);

  const auto g = covariance_at_point(f, interior, pt(1.0, 2.0));
  const double closed = 3 - std::cos(1.0) - std::cos(2.0) - 0.5 * std::pow(std::sin(1.0), 2) - 0.5 * std::pow(std::sin(2.0), 2);
  CHECK(g.gamma_sq == Approx(closed).epsilon(1e-13));
  CHECK(g.gamma_sq == Approx(2.1083969163263141).epsilon(1e-13));
  const Matrix j = g.joint();
  const Matrix s22 = j.bottomRightCorner(2, 2);
  const Vector s21 = j.block(1, 0, 2, 1);
  CHECK(g.gamma_sq == Approx(j(0, 0) - s21.dot(s22.fullPivLu().solve(s21))).epsilon(1e-13));
  // C_j is the cofactor ratio, i.e. the first row of the inverse covariance
  const Matrix inv = j.inverse();
  for (int k = 0; k < 2; ++k) CHECK(g.cvec(k) == Approx(inv(0, k + 1)).epsilon(1e-10));

  Face vertex{2, {}, {0, 1}, {1, 1}};
  CHECK(conditional_variance(f, vertex, pt(pi / 2, pi / 2)) == Approx(3.0));
}

TEST_CASE("conditional variance ordering at random points") {
  GaussianIncrementField g(3, 0.8);
  const RectDomain cube(Vector::Constant(3, 0.2), Vector::Constant(3, 1.7));
  KeyedStream rng(7, 0);
  for (const auto& face : enumerate_faces(cube)) {
    for (int i = 0; i < 5; ++i) {
      Vector t(3);
      for (Index a = 0; a < 3; ++a) t(a) = 0.2 + 1.5 * rng.uniform();
      const auto cp = covariance_at_point(g, face, t);
      CHECK(cp.gamma_sq <= cp.theta_sq + 1e-12);
      CHECK(cp.theta_sq <= cp.nu + 1e-12);
    }
  }
}

TEST_CASE("H2 scan") {
  CosineField f;
  const RectDomain d = box(0.1, pi - 0.1, 0.1, pi - 0.1);
  const auto r = check_h2(f, d, 25);
  CHECK(r.passed);
  const double first = 0.1 + (pi - 0.2) / 26;
  CHECK(r.min_eigenvalue == Approx(0.5 * (1 - std::cos(first))).epsilon(1e-12));

  // one atom; <t, lambda> = 2 pi hits the grid exactly at the middle node
  SpectralSumField single({{pt(2 * pi / 3, 0.0), 1.0}, {pt(0.0, 1.0), 1.0}}, 1.0);
  const auto s = check_h2(single, box(1, 5, 1, 2), 3);
  CHECK_FALSE(s.passed);
  CHECK(std::abs(s.min_eigenvalue) < 1e-12);
  CHECK(s.argmin(0) == Approx(3.0));

  SpectralSumField zero_freq({{pt(0.0, 0.0), 1.0}, {pt(1.0, 0.0), 1.0}}, 1.0);
  CHECK_FALSE(check_h2(zero_freq, box(0.5, 2, 0.5, 2), 10).passed);
}

TEST_CASE("variance maximizer location") {
  CosineField f;
  const auto interior = max_variance(f, box(0, 1.5 * pi, 0, 1.5 * pi));
  CHECK(interior.sigma_sq == Approx(5.0).epsilon(1e-12));
  CHECK((interior.argmax - pt(pi, pi)).norm() < 1e-6);
  CHECK(interior.face.is_interior());
  CHECK(interior.ties.size() == 1);

  const auto corner = max_variance(f, box(0, pi / 2, 0, pi / 2));
  CHECK(corner.sigma_sq == Approx(3.0).epsilon(1e-12));
  CHECK(corner.face.is_vertex());
  CHECK(corner.face.epsilon == std::vector<int>{1, 1});

  const auto edge = max_variance(f, box(0, 1.5 * pi, 0, pi / 2));
  CHECK(edge.sigma_sq == Approx(4.0).epsilon(1e-12));
  CHECK(edge.face.to_string() == "1|{1}|{2:1}");
  CHECK(edge.argmax(0) == Approx(pi).epsilon(1e-7));

  const auto tied = max_variance(f, box(-pi - 1, pi + 1, 0, 1.5 * pi));
  CHECK(tied.ties.size() == 2);
}

TEST_CASE("model validation and json round trip") {
  CHECK_THROWS_AS(SpectralSumField({}, 1.0), ConfigError);
  CHECK_THROWS_AS(SpectralSumField({{pt(1, 0), -1.0}}, 1.0), ConfigError);
  CHECK_THROWS_AS(SpectralSumField({{pt(1, 0), 1.0}, {Vector{{1.0}}, 1.0}}, 1.0), ConfigError);
  CHECK_THROWS_AS(GaussianIncrementField(2, 0.0), ConfigError);

  const auto cos_model = model_from_json(nlohmann::json::parse(R"({"field": {"type": "cosine"}})"));
  CHECK(cos_model->name() == "cosine");
  const auto spec = nlohmann::json::parse(
      R"({"type": "spectral_sum", "atoms": [{"freq": [1, 2], "weight": 0.5}], "offset_var": 0.25})");
  const auto m = model_from_json(spec);
  CHECK(m->variance(pt(0, 0)) == Approx(0.25));
  const auto back = model_from_json(model_to_json(*m));
  CHECK(back->variance(pt(0.3, 0.4)) == m->variance(pt(0.3, 0.4)));
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"type": "bogus"})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"type": "gaussian_increment", "scale": 2})")), ConfigError);
}
