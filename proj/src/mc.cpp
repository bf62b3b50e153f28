#include "exk/mc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "exk/errors.hpp"
#include "exk/parallel.hpp"
#include "exk/rng.hpp"

namespace exk {

GridSpec::GridSpec(RectDomain domain, int points_per_axis)
    : domain_(std::move(domain)), points_per_axis_(points_per_axis) {
  if (points_per_axis < 2) throw ConfigError("grid: points_per_axis must be >= 2");
}

Index GridSpec::total_points() const {
  Index total = 1;
  for (Index i = 0; i < dim(); ++i) total *= points_per_axis_;
  return total;
}

Vector GridSpec::point(Index flat) const {
  Vector t(dim());
  for (Index a = dim() - 1; a >= 0; --a) {
    const Index k = flat % points_per_axis_;
    flat /= points_per_axis_;
    t(a) = domain_.lower()(a) + static_cast<double>(k) * domain_.width(a) / (points_per_axis_ - 1);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Simulation

FieldSampler::FieldSampler(const FieldModel& model, GridSpec grid) : grid_(std::move(grid)) {
  const auto* spectral = dynamic_cast<const SpectralSumField*>(&model);
  if (!spectral) {
    throw CapabilityError("Monte Carlo requires a finite spectral-sum field; '" + model.name() +
                          "' cannot be simulated exactly");
  }
  if (spectral->dim() != grid_.dim()) throw ConfigError("model and domain dimensions differ");
  const auto& atoms = spectral->atoms();
  const Index p = grid_.total_points();
  basis_.resize(p, 1 + 2 * static_cast<Index>(atoms.size()));
  const double s0 = std::sqrt(spectral->offset_var());
  for (Index i = 0; i < p; ++i) {
    const Vector t = grid_.point(i);
    basis_(i, 0) = s0;
    for (std::size_t m = 0; m < atoms.size(); ++m) {
      const double phase = t.dot(atoms[m].freq);
      const double amp = std::sqrt(atoms[m].weight);
      basis_(i, 1 + 2 * m) = amp * (std::cos(phase) - 1.0);
      basis_(i, 2 + 2 * m) = amp * std::sin(phase);
    }
  }
}

void FieldSampler::sample(std::uint64_t seed, std::uint64_t replicate, std::vector<double>& out) const {
  KeyedStream stream(seed, replicate);
  Vector xi(basis_.cols());
  for (Index j = 0; j < xi.size(); ++j) xi(j) = stream.normal();
  out.resize(static_cast<std::size_t>(basis_.rows()));
  Eigen::Map<Vector>(out.data(), basis_.rows()).noalias() = basis_ * xi;
}

Realization sample_field(const FieldModel& model, const GridSpec& grid, std::uint64_t seed, std::uint64_t replicate) {
  Realization r{grid, {}, seed, replicate};
  FieldSampler(model, grid).sample(seed, replicate, r.values);
  return r;
}

// ---------------------------------------------------------------------------
// Euler characteristic

namespace {

EcCount ec_1d(const std::vector<std::uint8_t>& mask, int n) {
  EcCount out{{0, 0}, 0};
  for (int i = 0; i < n; ++i) {
    out.cells[0] += mask[i];
    if (i + 1 < n) out.cells[1] += mask[i] & mask[i + 1];
  }
  return out;
}

// Row scan: each row contributes its vertices and horizontal edges; each pair of
// rows contributes vertical edges and squares.
EcCount ec_2d(const std::vector<std::uint8_t>& mask, int rows, int cols) {
  EcCount out{{0, 0, 0}, 0};
  for (int r = 0; r < rows; ++r) {
    const std::uint8_t* row = mask.data() + static_cast<std::size_t>(r) * cols;
    long long v = 0, h = 0;
    for (int c = 0; c < cols; ++c) v += row[c];
    for (int c = 0; c + 1 < cols; ++c) h += row[c] & row[c + 1];
    out.cells[0] += v;
    out.cells[1] += h;
    if (r + 1 < rows) {
      const std::uint8_t* next = row + cols;
      long long vert = 0, sq = 0;
      for (int c = 0; c < cols; ++c) vert += row[c] & next[c];
      for (int c = 0; c + 1 < cols; ++c) sq += row[c] & row[c + 1] & next[c] & next[c + 1];
      out.cells[1] += vert;
      out.cells[2] += sq;
    }
  }
  return out;
}

EcCount ec_3d(const std::vector<std::uint8_t>& mask, const std::vector<int>& shape) {
  EcCount out{{0, 0, 0, 0}, 0};
  const int n0 = shape[0], n1 = shape[1], n2 = shape[2];
  const auto at = [&](int i, int j, int k) { return mask[(static_cast<std::size_t>(i) * n1 + j) * n2 + k]; };
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j)
      for (int k = 0; k < n2; ++k) {
        if (!at(i, j, k)) continue;
        for (int s = 0; s < 8; ++s) {
          const int di = s & 1, dj = (s >> 1) & 1, dk = (s >> 2) & 1;
          if (i + di >= n0 || j + dj >= n1 || k + dk >= n2) continue;
          bool all = true;
          for (int c = 0; c < 8 && all; ++c) {
            if ((c & ~s) != 0) continue;  // corners of the cell spanned by axes in s
            all = at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          }
          if (all) ++out.cells[di + dj + dk];
        }
      }
  return out;
}

}  // namespace

EcCount cubical_ec(const std::vector<std::uint8_t>& mask, const std::vector<int>& shape) {
  std::size_t total = 1;
  for (int s : shape) total *= static_cast<std::size_t>(s);
  if (mask.size() != total) throw ConfigError("cubical_ec: mask size does not match its shape");
  EcCount out;
  switch (shape.size()) {
    case 1: out = ec_1d(mask, shape[0]); break;
    case 2: out = ec_2d(mask, shape[0], shape[1]); break;
    case 3: out = ec_3d(mask, shape); break;
    default:
      throw CapabilityError("empirical Euler characteristic supports N in {1, 2, 3}, got " +
                            std::to_string(shape.size()));
  }
  for (std::size_t d = 0; d < out.cells.size(); ++d) out.chi += (d % 2 == 0 ? 1 : -1) * out.cells[d];
  return out;
}

EcCount empirical_ec(const std::vector<double>& values, const std::vector<int>& shape, double u) {
  std::vector<std::uint8_t> mask(values.size());
  std::transform(values.begin(), values.end(), mask.begin(), [u](double v) { return v >= u ? 1 : 0; });
  return cubical_ec(mask, shape);
}

EcCount empirical_ec(const Realization& realization, double u) {
  return empirical_ec(realization.values, realization.grid.shape(), u);
}

namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

long long ec_oracle_2d(const std::vector<std::uint8_t>& mask, int rows, int cols) {
  const auto on = [&](int r, int c) {
    return r >= 0 && c >= 0 && r < rows && c < cols && mask[static_cast<std::size_t>(r) * cols + c];
  };

  DisjointSets vertices(rows * cols);
  int set_count = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (!on(r, c)) continue;
      ++set_count;
      if (on(r, c + 1)) vertices.unite(r * cols + c, r * cols + c + 1);
      if (on(r + 1, c)) vertices.unite(r * cols + c, (r + 1) * cols + c);
    }
  long long components = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (on(r, c) && vertices.find(r * cols + c) == r * cols + c) ++components;
  if (set_count == 0) return 0;

  // Unit squares with lower-left vertex (r, c), r in [-1, rows), c in [-1, cols).
  const int sr = rows + 1, sc = cols + 1;
  const auto square = [&](int r, int c) { return (r + 1) * sc + (c + 1); };
  const auto filled = [&](int r, int c) { return on(r, c) && on(r + 1, c) && on(r, c + 1) && on(r + 1, c + 1); };
  DisjointSets squares(sr * sc);
  for (int r = -1; r < rows; ++r)
    for (int c = -1; c < cols; ++c) {
      if (filled(r, c)) continue;
      // shared edge with the right neighbour runs from (r, c+1) to (r+1, c+1)
      if (c + 1 < cols && !filled(r, c + 1) && !(on(r, c + 1) && on(r + 1, c + 1))) {
        squares.unite(square(r, c), square(r, c + 1));
      }
      // shared edge with the upper neighbour runs from (r+1, c) to (r+1, c+1)
      if (r + 1 < rows && !filled(r + 1, c) && !(on(r + 1, c) && on(r + 1, c + 1))) {
        squares.unite(square(r, c), square(r + 1, c));
      }
    }
  long long regions = 0;
  for (int r = -1; r < rows; ++r)
    for (int c = -1; c < cols; ++c)
      if (!filled(r, c) && squares.find(square(r, c)) == square(r, c)) ++regions;
  const long long holes = regions - 1;  // one region is the exterior
  return components - holes;
}

// ---------------------------------------------------------------------------
// Replicate loop

double pairwise_sum(const double* data, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

namespace {

// Flat indices of the coarse grid inside the nested fine grid (2R - 1 points per axis).
std::vector<std::size_t> nested_indices(Index dim, int coarse) {
  const int fine = 2 * coarse - 1;
  std::size_t total = 1;
  for (Index a = 0; a < dim; ++a) total *= static_cast<std::size_t>(coarse);
  std::vector<std::size_t> out(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat, idx = 0, stride = 1;
    for (Index a = dim - 1; a >= 0; --a) {
      idx += 2 * (rem % coarse) * stride;
      rem /= coarse;
      stride *= fine;
    }
    out[flat] = idx;
  }
  return out;
}

Estimate binomial(const std::vector<double>& hits) {
  const double n = static_cast<double>(hits.size());
  const double p = pairwise_sum(hits.data(), hits.size()) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

}  // namespace

std::vector<McLevelResult> mc_run(const FieldModel& model, const RectDomain& domain, const std::vector<double>& levels,
                                  const McOptions& options) {
  if (options.reps < 100) throw ConfigError("Monte Carlo needs at least 100 replicates");
  const int coarse_n = options.points_per_axis;
  const GridSpec coarse(domain, coarse_n);
  const GridSpec sampled = options.dual_resolution ? GridSpec(domain, 2 * coarse_n - 1) : coarse;
  const FieldSampler sampler(model, sampled);
  if (options.compute_ec && domain.dim() > 3) {
    throw CapabilityError("empirical Euler characteristic supports N in {1, 2, 3}");
  }
  const auto nested = options.dual_resolution ? nested_indices(domain.dim(), coarse_n) : std::vector<std::size_t>{};
  const auto shape = coarse.shape();

  const auto reps = static_cast<std::size_t>(options.reps);
  const std::size_t nl = levels.size();
  std::vector<double> max_coarse(reps), max_fine(reps);
  std::vector<double> chi(options.compute_ec ? reps * nl : 0);

  constexpr long long chunk = 64;
  const long long chunks = (options.reps + chunk - 1) / chunk;
  parallel_for(chunks, options.threads, [&](long long ci) {
    std::vector<double> values, coarse_values;
    std::vector<std::uint8_t> mask;
    const long long end = std::min(options.reps, (ci + 1) * chunk);
    for (long long rep = ci * chunk; rep < end; ++rep) {
      sampler.sample(options.seed, static_cast<std::uint64_t>(rep), values);
      const std::vector<double>* grid_values = &values;
      if (options.dual_resolution) {
        max_fine[rep] = *std::max_element(values.begin(), values.end());
        coarse_values.resize(nested.size());
        for (std::size_t i = 0; i < nested.size(); ++i) coarse_values[i] = values[nested[i]];
        grid_values = &coarse_values;
      }
      max_coarse[rep] = *std::max_element(grid_values->begin(), grid_values->end());
      if (!options.compute_ec) continue;
      mask.resize(grid_values->size());
      for (std::size_t l = 0; l < nl; ++l) {
        const double u = levels[l];
        std::transform(grid_values->begin(), grid_values->end(), mask.begin(),
                       [u](double v) { return v >= u ? 1 : 0; });
        chi[l * reps + rep] = static_cast<double>(cubical_ec(mask, shape).chi);
      }
    }
  });

  std::vector<McLevelResult> out(nl);
  std::vector<double> hits(reps), dev(reps);
  for (std::size_t l = 0; l < nl; ++l) {
    auto& r = out[l];
    r.level = levels[l];
    for (std::size_t i = 0; i < reps; ++i) hits[i] = max_coarse[i] >= r.level ? 1.0 : 0.0;
    const auto p = binomial(hits);
    r.p_hat = p.value;
    r.stderr_p = p.stderr_value;
    if (options.dual_resolution) {
      for (std::size_t i = 0; i < reps; ++i) hits[i] = max_fine[i] >= r.level ? 1.0 : 0.0;
      const auto pf = binomial(hits);
      r.p_hat_fine = pf.value;
      r.stderr_fine = pf.stderr_value;
      r.bias_flag = std::abs(r.p_hat_fine - r.p_hat) > r.stderr_p;
    }
    if (options.compute_ec) {
      const double* c = chi.data() + l * reps;
      const double mean = pairwise_sum(c, reps) / static_cast<double>(reps);
      for (std::size_t i = 0; i < reps; ++i) dev[i] = (c[i] - mean) * (c[i] - mean);
      const double var = pairwise_sum(dev.data(), reps) / static_cast<double>(reps - 1);
      r.mean_chi = mean;
      r.chi_stderr = std::sqrt(var / static_cast<double>(reps));
    }
  }
  return out;
}

Estimate empirical_sup_prob(const FieldModel& model, const RectDomain& domain, double u, int points_per_axis,
                            long long reps, std::uint64_t seed, int threads) {
  McOptions opts;
  opts.points_per_axis = points_per_axis;
  opts.reps = reps;
  opts.seed = seed;
  opts.threads = threads;
  opts.compute_ec = false;
  const auto r = mc_run(model, domain, {u}, opts).front();
  return {r.p_hat, r.stderr_p};
}

Estimate mc_mean_ec(const FieldModel& model, const RectDomain& domain, double u, int points_per_axis, long long reps,
                    std::uint64_t seed, int threads) {
  McOptions opts;
  opts.points_per_axis = points_per_axis;
  opts.reps = reps;
  opts.seed = seed;
  opts.threads = threads;
  const auto r = mc_run(model, domain, {u}, opts).front();
  return {r.mean_chi, r.chi_stderr};
}

void export_realization(const Realization& realization, const std::string& prefix) {
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw ConfigError("cannot write " + prefix + ".bin");
  for (double v : realization.values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    bin.write(bytes, 8);
  }
  nlohmann::json header;
  header["shape"] = realization.grid.shape();
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  header["order"] = "row-major";
  const auto& d = realization.grid.domain();
  header["domain"]["lower"] = std::vector<double>(d.lower().data(), d.lower().data() + d.dim());
  header["domain"]["upper"] = std::vector<double>(d.upper().data(), d.upper().data() + d.dim());
  header["seed"] = realization.seed;
  header["replicate"] = realization.replicate;
  std::ofstream json(prefix + ".json");
  if (!json) throw ConfigError("cannot write " + prefix + ".json");
  json << header.dump(2) << "\n";
}

}  // namespace exk
