#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "exk/errors.hpp"
#include "exk/gauss.hpp"
#include "exk/rng.hpp"

namespace exk {
namespace {

constexpr std::array<int, 12> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

// P(alpha <= Z <= beta) and the inverse map w -> z on that interval, evaluated in
// whichever tail keeps full relative precision.
struct Interval {
  double alpha;
  double beta;
  double lo_tail = 0.0;  // Psi(alpha) in the upper regime, Phi(alpha) otherwise
  double prob = 0.0;
  bool upper = false;

  Interval(double a, double b) : alpha(a), beta(b) {
    if (alpha > 0.0) {
      upper = true;
      lo_tail = gauss_tail(alpha);
      prob = lo_tail - gauss_tail(beta);
    } else if (beta < 0.0) {
      lo_tail = normal_cdf(alpha);
      prob = normal_cdf(beta) - lo_tail;
    } else {
      lo_tail = normal_cdf(alpha);
      prob = 1.0 - gauss_tail(beta) - lo_tail;
    }
    prob = std::max(prob, 0.0);
  }

  double sample(double w) const {
    double z = upper ? normal_upper_quantile(lo_tail - w * prob) : normal_quantile(lo_tail + w * prob);
    return std::clamp(z, alpha, beta);
  }
};

double truncated_mean(double alpha, double beta) {
  const Interval iv(alpha, beta);
  const double pa = std::isfinite(alpha) ? normal_pdf(alpha) : 0.0;
  const double pb = std::isfinite(beta) ? normal_pdf(beta) : 0.0;
  if (iv.prob > 1e-300) return (pa - pb) / iv.prob;
  if (std::isfinite(alpha) && std::isfinite(beta)) return 0.5 * (alpha + beta);
  return std::isfinite(alpha) ? alpha : (std::isfinite(beta) ? beta : 0.0);
}

struct Prepared {
  Matrix chol;  // lower triangular, rows/cols in integration order
  Vector a;
  Vector b;
};

// Cholesky factor with variables ordered so the most constrained ones come first.
Prepared reorder_and_factor(Matrix cov, Vector a, Vector b) {
  const Index d = cov.rows();
  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  const double tiny = 1e-12 * scale;
  Matrix chol = Matrix::Zero(d, d);
  Vector y = Vector::Zero(d);
  for (Index i = 0; i < d; ++i) {
    Index best = i;
    double best_prob = kInf;
    for (Index j = i; j < d; ++j) {
      double s = 0.0, rem = cov(j, j);
      for (Index m = 0; m < i; ++m) {
        s += chol(j, m) * y(m);
        rem -= chol(j, m) * chol(j, m);
      }
      if (rem <= tiny) continue;
      const double den = std::sqrt(rem);
      const double p = Interval((a(j) - s) / den, (b(j) - s) / den).prob;
      if (p < best_prob) {
        best_prob = p;
        best = j;
      }
    }
    if (best != i) {
      cov.row(i).swap(cov.row(best));
      cov.col(i).swap(cov.col(best));
      std::swap(a(i), a(best));
      std::swap(b(i), b(best));
      chol.row(i).swap(chol.row(best));
    }
    double rem = cov(i, i) - chol.row(i).head(i).squaredNorm();
    if (rem <= tiny) {
      chol(i, i) = 0.0;
      y(i) = 0.0;
      continue;
    }
    chol(i, i) = std::sqrt(rem);
    for (Index r = i + 1; r < d; ++r) {
      chol(r, i) = (cov(r, i) - chol.row(r).head(i).dot(chol.row(i).head(i))) / chol(i, i);
    }
    const double s = chol.row(i).head(i).dot(y.head(i));
    y(i) = truncated_mean((a(i) - s) / chol(i, i), (b(i) - s) / chol(i, i));
  }
  return {std::move(chol), std::move(a), std::move(b)};
}

// Separation-of-variables integrand on [0,1)^{d-1}.
double sov_integrand(const Prepared& prep, const double* w, Vector& z) {
  const Index d = prep.chol.rows();
  double f = 1.0;
  for (Index i = 0; i < d; ++i) {
    const double s = prep.chol.row(i).head(i).dot(z.head(i));
    const double c = prep.chol(i, i);
    if (c == 0.0) {
      const double slack = 1e-10 * std::max(1.0, std::abs(s));
      if (s < prep.a(i) - slack || s > prep.b(i) + slack) return 0.0;
      z(i) = 0.0;
      continue;
    }
    const Interval iv((prep.a(i) - s) / c, (prep.b(i) - s) / c);
    f *= iv.prob;
    if (f == 0.0) return 0.0;
    if (i + 1 < d) z(i) = iv.sample(w[i]);
  }
  return f;
}

}  // namespace

MvnResult mvn_prob(const MvnProblem& problem, double accuracy, std::uint64_t seed, const MvnOptions& options) {
  const Index d = problem.cov.rows();
  if (d < 1 || problem.cov.cols() != d || problem.lower.size() != d || problem.upper.size() != d) {
    throw ConfigError("mvn_prob: inconsistent problem dimensions");
  }
  if (d > 12) throw CapabilityError("mvn_prob: dimension " + std::to_string(d) + " exceeds the supported 12");
  if (!problem.cov.isApprox(problem.cov.transpose(), 1e-12)) throw NumericError("mvn_prob: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(problem.cov, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, problem.cov.diagonal().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw NumericError("mvn_prob: covariance is not positive semi-definite (min eigenvalue " +
                       std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
  Vector a = problem.lower, b = problem.upper;
  if (problem.mean.size() == d) {
    a -= problem.mean;
    b -= problem.mean;
  }
  for (Index i = 0; i < d; ++i) {
    if (!(a(i) < b(i))) return {0.0, 0.0, false};
  }

  const Prepared prep = reorder_and_factor(problem.cov, a, b);
  const Index dims = d - 1;
  Vector z = Vector::Zero(d);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (dims == 0) {
    const double p = sov_integrand(prep, nullptr, z);
    return {p, 8.0 * eps * p, false};
  }

  std::array<double, 12> gen{};
  for (Index i = 0; i < dims; ++i) gen[i] = std::fmod(std::sqrt(static_cast<double>(kPrimes[i])), 1.0);

  const int reps = std::max(2, options.randomizations);
  std::vector<std::array<double, 12>> shifts(reps);
  KeyedStream stream(seed, 0x6d766eULL);
  for (auto& shift : shifts)
    for (Index i = 0; i < dims; ++i) shift[i] = stream.uniform();

  std::vector<double> sums(reps, 0.0);
  long long done = 0;
  long long target = std::max(16, options.points_per_randomization);
  MvnResult result;
  std::array<double, 12> w{};
  while (true) {
    for (int r = 0; r < reps; ++r) {
      double acc = 0.0;
      for (long long j = done + 1; j <= target; ++j) {
        for (Index i = 0; i < dims; ++i) {
          double x = std::fmod(static_cast<double>(j) * gen[i] + shifts[r][i], 1.0);
          w[i] = 1.0 - std::abs(2.0 * x - 1.0);  // baker's transform
        }
        acc += sov_integrand(prep, w.data(), z);
      }
      sums[r] += acc;
    }
    done = target;
    double mean = 0.0;
    for (double s : sums) mean += s / static_cast<double>(done);
    mean /= reps;
    double var = 0.0;
    for (double s : sums) {
      const double e = s / static_cast<double>(done) - mean;
      var += e * e;
    }
    var /= static_cast<double>(reps) * (reps - 1);
    result.p = std::clamp(mean, 0.0, 1.0);
    // rounding in the running sums bounds the attainable accuracy
    const double rounding = 8.0 * eps * std::sqrt(static_cast<double>(done) * reps) * result.p;
    result.err_est = std::max(3.0 * std::sqrt(var), rounding);
    if (result.err_est <= accuracy) break;
    if (target * 2 > options.max_points_per_randomization) {
      result.warning = true;
      break;
    }
    target *= 2;
  }
  return result;
}

}  // namespace exk
