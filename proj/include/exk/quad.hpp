#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <numbers>
#include <optional>
#include <vector>

#include "exk/geometry.hpp"
#include "exk/types.hpp"

namespace exk {

struct QuadSpec {
  int order_per_axis = 24;
  bool adaptive = true;
  double rel_tol = 1e-6;
  int max_subdivisions = 12;  // bisection depth cap per box
  int max_cone_dim = 4;       // 1 (tail) + number of cone axes
  long long max_evaluations = 50'000'000;
};

struct QuadResult {
  double value = 0.0;
  double err_est = 0.0;
  bool converged = true;
  long long evaluations = 0;
};

template <typename Scalar>
struct GaussLegendreRule {
  std::vector<Scalar> nodes;  // on (-1, 1), ascending
  std::vector<Scalar> weights;
};

/// Gauss-Legendre nodes by Newton iteration on the three-term recurrence.
template <typename Scalar>
GaussLegendreRule<Scalar> compute_gauss_legendre(int order) {
  GaussLegendreRule<Scalar> rule;
  rule.nodes.assign(order, Scalar(0));
  rule.weights.assign(order, Scalar(2));
  if (order == 1) return rule;
  // P_order(x) and its derivative
  const auto legendre = [order](Scalar x) {
    Scalar p0 = 1, p1 = x;
    for (int n = 2; n <= order; ++n) {
      Scalar p2 = ((2 * n - 1) * x * p1 - (n - 1) * p0) / n;
      p0 = p1;
      p1 = p2;
    }
    return std::pair<Scalar, Scalar>{p1, order * (x * p1 - p0) / (x * x - 1)};
  };
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (int i = 0; i < order / 2; ++i) {
    Scalar x = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(order) + Scalar(0.5)));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(x);
      const Scalar dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 4 * std::numeric_limits<Scalar>::epsilon()) break;
    }
    const Scalar dp = legendre(x).second;
    const Scalar w = 2 / ((1 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  if (order % 2 == 1) {
    const Scalar dp = legendre(Scalar(0)).second;
    rule.weights[order / 2] = 2 / (dp * dp);
  }
  return rule;
}

/// Cached double-precision rule; safe to call concurrently.
const GaussLegendreRule<double>& gauss_legendre(int order);

using BoxIntegrand = std::function<double(const Vector&)>;

/// Tensor Gauss-Legendre over a box; when adaptive, the box with the largest
/// (order vs order/2) discrepancy is bisected along every axis until the total
/// discrepancy drops below rel_tol relative. Throws NumericError on a non-finite
/// integrand value.
QuadResult integrate_box(const Vector& lower, const Vector& upper, const BoxIntegrand& f, const QuadSpec& spec);

/// Integral over an open face of dimension k >= 1; f receives the k free coordinates.
QuadResult integrate_face(const RectDomain& domain, const Face& face, const BoxIntegrand& f, const QuadSpec& spec);

/// x = origin + scale * s / (1 - s), s in [0, 1).
struct TailMap {
  double origin = 0.0;
  double scale = 1.0;
  double x(double s) const { return origin + scale * s / (1.0 - s); }
  double jacobian(double s) const { return scale / ((1.0 - s) * (1.0 - s)); }
};

QuadResult integrate_tail(double u, const std::function<double(double)>& g, const QuadSpec& spec, double scale = 1.0);

/// h(x, y) with y in the cone (one entry per constraint, in constraint order).
using ConeIntegrand = std::function<double(double, const Vector&)>;

/// Integral over [u, inf) x E(J). Without an x origin only the cone is integrated
/// (x is passed as 0). `scales` optionally sets the tail-map length per axis,
/// x first. Throws CapabilityError when 1 + cone size exceeds spec.max_cone_dim.
QuadResult integrate_cone(const OutwardCone& cone, std::optional<double> x_origin, const ConeIntegrand& h,
                          const QuadSpec& spec, const std::vector<double>& scales = {});

}  // namespace exk
