#include "exk/quad.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <sstream>

#include "exk/errors.hpp"

namespace exk {

const GaussLegendreRule<double>& gauss_legendre(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussLegendreRule<double>>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussLegendreRule<double>>(compute_gauss_legendre<double>(order));
  return *slot;
}

namespace {

struct BoxEstimate {
  Vector lower;
  Vector upper;
  double value = 0.0;
  double abs_value = 0.0;
  double err = 0.0;
  int depth = 0;
  long long id = 0;
};

[[noreturn]] void throw_non_finite(const Vector& x, double v) {
  std::ostringstream msg;
  msg << "integrand returned " << v << " at (";
  for (Index i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x(i);
  msg << ")";
  throw NumericError(msg.str());
}

// Tensor rule on one box; returns {value, |f| integral}.
std::pair<double, double> tensor_rule(const Vector& lower, const Vector& upper, const BoxIntegrand& f,
                                      const GaussLegendreRule<double>& rule, long long& evals) {
  const Index d = lower.size();
  const int n = static_cast<int>(rule.nodes.size());
  const Vector half = 0.5 * (upper - lower);
  const Vector mid = 0.5 * (upper + lower);
  const double jac = half.prod();
  std::vector<int> idx(d, 0);
  Vector x(d);
  double sum = 0.0, abs_sum = 0.0;
  while (true) {
    double w = jac;
    for (Index i = 0; i < d; ++i) {
      x(i) = mid(i) + half(i) * rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    const double v = f(x);
    ++evals;
    if (!std::isfinite(v)) throw_non_finite(x, v);
    sum += w * v;
    abs_sum += w * std::abs(v);
    Index i = 0;
    for (; i < d; ++i) {
      if (++idx[i] < n) break;
      idx[i] = 0;
    }
    if (i == d) break;
  }
  return {sum, abs_sum};
}

}  // namespace

QuadResult integrate_box(const Vector& lower, const Vector& upper, const BoxIntegrand& f, const QuadSpec& spec) {
  if (spec.order_per_axis < 2) throw ConfigError("quadrature order must be at least 2");
  const Index d = lower.size();
  QuadResult result;
  if (d == 0) {
    result.value = f(Vector());
    result.evaluations = 1;
    if (!std::isfinite(result.value)) throw_non_finite(Vector(), result.value);
    return result;
  }
  const auto& fine = gauss_legendre(spec.order_per_axis);
  const auto& coarse = gauss_legendre(std::max(1, spec.order_per_axis / 2));

  long long next_id = 0;
  auto estimate = [&](Vector lo, Vector hi, int depth) {
    BoxEstimate box;
    std::tie(box.value, box.abs_value) = tensor_rule(lo, hi, f, fine, result.evaluations);
    const double rough = tensor_rule(lo, hi, f, coarse, result.evaluations).first;
    box.err = std::abs(box.value - rough);
    box.lower = std::move(lo);
    box.upper = std::move(hi);
    box.depth = depth;
    box.id = next_id++;
    return box;
  };

  std::vector<BoxEstimate> done;
  auto worse = [](const BoxEstimate& a, const BoxEstimate& b) {
    return a.err < b.err || (a.err == b.err && a.id > b.id);
  };
  std::priority_queue<BoxEstimate, std::vector<BoxEstimate>, decltype(worse)> open(worse);
  open.push(estimate(lower, upper, 0));

  auto totals = [&]() {
    double value = 0.0, abs_value = 0.0, err = 0.0;
    std::vector<const BoxEstimate*> all;
    all.reserve(done.size() + open.size());
    for (const auto& b : done) all.push_back(&b);
    // priority_queue has no iteration; copy out its container via a temporary
    auto copy = open;
    std::vector<BoxEstimate> rest;
    while (!copy.empty()) {
      rest.push_back(copy.top());
      copy.pop();
    }
    for (const auto& b : rest) all.push_back(&b);
    std::sort(all.begin(), all.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (auto* b : all) {
      value += b->value;
      abs_value += b->abs_value;
      err += b->err;
    }
    return std::tuple{value, abs_value, err};
  };

  double running_value = open.top().value, running_abs = open.top().abs_value, running_err = open.top().err;
  auto tolerance = [&](double value, double abs_value) {
    return std::max(spec.rel_tol * std::abs(value), 1e-14 * abs_value);
  };

  bool converged = !spec.adaptive || running_err <= tolerance(running_value, running_abs);
  while (!converged && !open.empty()) {
    if (result.evaluations >= spec.max_evaluations) break;
    BoxEstimate box = open.top();
    open.pop();
    if (box.depth >= spec.max_subdivisions) {
      done.push_back(std::move(box));
      continue;
    }
    running_value -= box.value;
    running_abs -= box.abs_value;
    running_err -= box.err;
    const Vector mid = 0.5 * (box.lower + box.upper);
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
      Vector lo = box.lower, hi = box.upper;
      for (Index i = 0; i < d; ++i) {
        if (corner & (1u << i)) lo(i) = mid(i);
        else hi(i) = mid(i);
      }
      auto child = estimate(std::move(lo), std::move(hi), box.depth + 1);
      running_value += child.value;
      running_abs += child.abs_value;
      running_err += child.err;
      open.push(std::move(child));
    }
    converged = running_err <= tolerance(running_value, running_abs);
  }

  const auto [value, abs_value, err] = totals();
  result.value = value;
  result.err_est = err;
  result.converged = !spec.adaptive || err <= tolerance(value, abs_value);
  return result;
}

QuadResult integrate_face(const RectDomain& domain, const Face& face, const BoxIntegrand& f, const QuadSpec& spec) {
  if (face.dim() < 1) throw CapabilityError("integrate_face: face " + face.to_string() + " has dimension 0");
  Vector lo(face.dim()), hi(face.dim());
  for (int m = 0; m < face.dim(); ++m) {
    lo(m) = domain.lower()(face.sigma[m]);
    hi(m) = domain.upper()(face.sigma[m]);
  }
  return integrate_box(lo, hi, f, spec);
}

QuadResult integrate_tail(double u, const std::function<double(double)>& g, const QuadSpec& spec, double scale) {
  const TailMap map{u, scale};
  const auto mapped = [&](const Vector& s) {
    const double v = g(map.x(s(0)));
    return v == 0.0 ? 0.0 : v * map.jacobian(s(0));
  };
  return integrate_box(Vector::Zero(1), Vector::Ones(1), mapped, spec);
}

QuadResult integrate_cone(const OutwardCone& cone, std::optional<double> x_origin, const ConeIntegrand& h,
                          const QuadSpec& spec, const std::vector<double>& scales) {
  const Index m = static_cast<Index>(cone.size());
  const Index offset = x_origin ? 1 : 0;
  const Index dims = offset + m;
  if (dims > spec.max_cone_dim) {
    throw CapabilityError("integrate_cone: nested dimension " + std::to_string(dims) + " exceeds the cap of " +
                          std::to_string(spec.max_cone_dim) + "; use the Monte Carlo oracle instead");
  }
  std::vector<TailMap> maps(dims);
  for (Index i = 0; i < dims; ++i) {
    maps[i].origin = (i == 0 && x_origin) ? *x_origin : 0.0;
    maps[i].scale = i < static_cast<Index>(scales.size()) ? scales[i] : 1.0;
  }
  Vector y(m);
  const auto mapped = [&](const Vector& s) {
    double jac = 1.0;
    for (Index i = 0; i < dims; ++i) jac *= maps[i].jacobian(s(i));
    const double x = x_origin ? maps[0].x(s(0)) : 0.0;
    for (Index j = 0; j < m; ++j) y(j) = cone.constraints[j].sign * maps[offset + j].x(s(offset + j));
    const double v = h(x, y);
    return v == 0.0 ? 0.0 : v * jac;
  };
  if (dims == 0) return integrate_box(Vector(), Vector(), mapped, spec);
  return integrate_box(Vector::Zero(dims), Vector::Ones(dims), mapped, spec);
}

}  // namespace exk
