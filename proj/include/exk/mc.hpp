#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "exk/field.hpp"
#include "exk/geometry.hpp"

namespace exk {

/// Uniform grid with both endpoints on every axis. Points are stored in
/// row-major order (the last axis varies fastest).
class GridSpec {
 public:
  GridSpec(RectDomain domain, int points_per_axis);

  const RectDomain& domain() const { return domain_; }
  int points_per_axis() const { return points_per_axis_; }
  Index dim() const { return domain_.dim(); }
  Index total_points() const;
  std::vector<int> shape() const { return std::vector<int>(dim(), points_per_axis_); }
  Vector point(Index flat) const;

 private:
  RectDomain domain_;
  int points_per_axis_;
};

struct Realization {
  GridSpec grid;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
};

/// Cell counts of the cubical complex spanned by above-threshold vertices.
struct EcCount {
  std::vector<long long> cells;  // cells[d] = number of d-cells
  long long chi = 0;
};

/// Exact simulation of a finite spectral sum on a grid:
/// X(t) = s0 xi0 + sum sqrt(w) [xi (cos<t,lambda> - 1) + xi' sin<t,lambda>].
/// The trigonometric basis is tabulated once; each replicate is one matrix-vector
/// product with Gaussians drawn from the stream keyed by (seed, replicate).
class FieldSampler {
 public:
  /// Throws CapabilityError unless the model is a SpectralSumField.
  FieldSampler(const FieldModel& model, GridSpec grid);

  const GridSpec& grid() const { return grid_; }
  void sample(std::uint64_t seed, std::uint64_t replicate, std::vector<double>& out) const;

 private:
  GridSpec grid_;
  Matrix basis_;
};

Realization sample_field(const FieldModel& model, const GridSpec& grid, std::uint64_t seed, std::uint64_t replicate);

/// Euler characteristic of the vertex-based cubical complex of a binary mask,
/// N in {1, 2, 3}. A d-cell is present iff all of its 2^d corners are set.
EcCount cubical_ec(const std::vector<std::uint8_t>& mask, const std::vector<int>& shape);

EcCount empirical_ec(const Realization& realization, double u);
EcCount empirical_ec(const std::vector<double>& values, const std::vector<int>& shape, double u);

/// Components minus holes of a 2-D mask (row-major, rows x cols). Components use
/// 4-connectivity of set vertices; holes are bounded components of the
/// complement, traced through unfilled unit squares across absent edges.
long long ec_oracle_2d(const std::vector<std::uint8_t>& mask, int rows, int cols);

struct McOptions {
  int points_per_axis = 128;
  long long reps = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Also evaluate the sup on the nested grid with 2R - 1 points per axis.
  bool dual_resolution = false;
  /// Skip the Euler characteristic (sup probability only).
  bool compute_ec = true;
};

struct McLevelResult {
  double level = 0.0;
  double p_hat = 0.0;
  double stderr_p = 0.0;
  double mean_chi = 0.0;
  double chi_stderr = 0.0;
  double p_hat_fine = std::numeric_limits<double>::quiet_NaN();
  double stderr_fine = std::numeric_limits<double>::quiet_NaN();
  bool bias_flag = false;  // coarse and fine estimates differ by more than the coarse stderr
};

/// One pass over the replicates evaluating every level. Results do not depend
/// on the thread count.
std::vector<McLevelResult> mc_run(const FieldModel& model, const RectDomain& domain, const std::vector<double>& levels,
                                  const McOptions& options);

struct Estimate {
  double value = 0.0;
  double stderr_value = 0.0;
};

/// Fraction of replicates whose grid maximum reaches u, with binomial stderr.
Estimate empirical_sup_prob(const FieldModel& model, const RectDomain& domain, double u, int points_per_axis,
                            long long reps, std::uint64_t seed, int threads = 1);

/// Replicate average of the cubical Euler characteristic.
Estimate mc_mean_ec(const FieldModel& model, const RectDomain& domain, double u, int points_per_axis, long long reps,
                    std::uint64_t seed, int threads = 1);

/// Writes prefix.bin (row-major little-endian float64) and prefix.json (shape,
/// domain, seed lineage).
void export_realization(const Realization& realization, const std::string& prefix);

/// Pairwise summation, deterministic for a given input order.
double pairwise_sum(const double* data, std::size_t n);

}  // namespace exk
