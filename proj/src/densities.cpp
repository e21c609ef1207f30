#include "microcal/densities.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace microcal {

namespace {

double trapezoid(const std::vector<double>& grid,
                 const std::vector<double>& values) {
  double sum = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    sum += 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
  return sum;
}

// Normalize to unit integral, floor, renormalize, floor again; the final
// floor keeps every value >= kDensityFloor while the integral stays within
// 1e-6 of one (floor * span is far below that).
void normalize_and_floor(const std::vector<double>& grid,
                         std::vector<double>& values) {
  for (int pass = 0; pass < 2; ++pass) {
    const double z = trapezoid(grid, values);
    if (!(z > 0.0)) throw std::logic_error("density has no mass");
    for (auto& v : values) v = std::max(v / z, kDensityFloor);
  }
}

std::vector<double> resample_linear(const Density& d,
                                    const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), 0.0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (x < d.grid.front() || x > d.grid.back()) continue;
    while (j + 2 < d.grid.size() && d.grid[j + 1] < x) ++j;
    const double x0 = d.grid[j], x1 = d.grid[j + 1];
    const double t = x1 > x0 ? (x - x0) / (x1 - x0) : 0.0;
    out[i] = d.values[j] + t * (d.values[j + 1] - d.values[j]);
  }
  return out;
}

void check_density(const Density& d, const char* role) {
  if (d.grid.size() < 2 || d.grid.size() != d.values.size())
    throw std::invalid_argument(std::string(role) + ": malformed density");
}

}  // namespace

Density kde(const std::vector<double>& samples, std::optional<GridSpec> grid) {
  const std::size_t n = samples.size();
  if (n < 2)
    throw InsufficientSamplesError("kde: need at least 2 samples, got " +
                                   std::to_string(n));
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= double(n);
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  var /= double(n - 1);
  if (!(var > 0.0))
    throw InsufficientSamplesError("kde: zero sample variance");

  Density d;
  d.bandwidth = std::sqrt(var) * std::pow(double(n), -0.2);  // Scott's rule

  GridSpec spec;
  if (grid) {
    spec = *grid;
  } else {
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    spec.lo = *lo - 3.0 * d.bandwidth;
    spec.hi = *hi + 3.0 * d.bandwidth;
    spec.points = 512;
  }
  if (spec.points < 2 || !(spec.hi > spec.lo))
    throw std::invalid_argument("kde: bad grid spec");

  d.grid.resize(static_cast<std::size_t>(spec.points));
  const double dx = (spec.hi - spec.lo) / double(spec.points - 1);
  for (int i = 0; i < spec.points; ++i) d.grid[std::size_t(i)] = spec.lo + dx * i;

  // kernels beyond 6 bandwidths contribute below double noise; a sorted
  // window keeps large populations cheap
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double inv_h = 1.0 / d.bandwidth;
  const double norm =
      inv_h / (double(n) * std::sqrt(2.0 * std::numbers::pi));
  d.values.assign(d.grid.size(), 0.0);
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    const double x = d.grid[i];
    const auto lo =
        std::lower_bound(sorted.begin(), sorted.end(), x - 6.0 * d.bandwidth);
    const auto hi =
        std::upper_bound(lo, sorted.end(), x + 6.0 * d.bandwidth);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double t = (x - *it) * inv_h;
      acc += std::exp(-0.5 * t * t);
    }
    d.values[i] = acc * norm;
  }
  normalize_and_floor(d.grid, d.values);
  return d;
}

double kl_divergence(const Density& target, const Density& candidate,
                     int grid_points) {
  check_density(target, "target");
  check_density(candidate, "candidate");
  if (grid_points < 2) throw std::invalid_argument("kl: bad grid size");

  const double lo = std::min(target.grid.front(), candidate.grid.front());
  const double hi = std::max(target.grid.back(), candidate.grid.back());
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  const double dx = (hi - lo) / double(grid_points - 1);
  for (int i = 0; i < grid_points; ++i) grid[std::size_t(i)] = lo + dx * i;

  std::vector<double> p = resample_linear(target, grid);
  std::vector<double> q = resample_linear(candidate, grid);
  normalize_and_floor(grid, p);
  normalize_and_floor(grid, q);

  std::vector<double> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    integrand[i] = p[i] * std::log(p[i] / q[i]);
  return std::max(0.0, trapezoid(grid, integrand));
}

ObjectiveVector objective_vector(
    const std::vector<int>& descriptor_ids,
    const std::vector<Density>& target_densities,
    const std::vector<DescriptorSamples>& candidate) {
  if (descriptor_ids.size() != target_densities.size() ||
      descriptor_ids.size() != candidate.size())
    throw std::invalid_argument("objective_vector: size mismatch");
  ObjectiveVector v;
  v.descriptor_ids = descriptor_ids;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (candidate[i].descriptor_id != descriptor_ids[i])
      throw std::invalid_argument("objective_vector: descriptor id mismatch");
    if (candidate[i].insufficient())
      throw InsufficientSamplesError(
          "descriptor " + std::to_string(descriptor_ids[i]) +
          ": fewer than 2 candidate samples");
    v.y.push_back(kl_divergence(target_densities[i], kde(candidate[i].samples)));
  }
  return v;
}

ObjectiveVector objective_vector(const std::vector<DescriptorSamples>& target,
                                 const std::vector<DescriptorSamples>& candidate) {
  std::vector<int> ids;
  std::vector<Density> densities;
  for (const auto& t : target) {
    ids.push_back(t.descriptor_id);
    densities.push_back(kde(t.samples));
  }
  return objective_vector(ids, densities, candidate);
}

double scalarize(const std::vector<double>& y, const ScalarizationConfig& cfg) {
  const std::size_t s = y.size();
  if (s == 0) throw std::invalid_argument("scalarize: empty objective vector");
  if (!cfg.weights.empty() && cfg.weights.size() != s)
    throw std::invalid_argument("scalarize: weight dimension mismatch");
  if (!cfg.ideal_point.empty() && cfg.ideal_point.size() != s)
    throw std::invalid_argument("scalarize: ideal-point dimension mismatch");

  double weight_sum = 0.0;
  double weighted = 0.0;
  double cheby = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s; ++i) {
    const double w = cfg.weights.empty() ? 1.0 : cfg.weights[i];
    if (w < 0.0) throw std::invalid_argument("scalarize: negative weight");
    const double z = cfg.ideal_point.empty() ? 0.0 : cfg.ideal_point[i];
    weight_sum += w;
    weighted += w * y[i];
    cheby = std::max(cheby, w * (y[i] - z));
  }
  if (!(weight_sum > 0.0))
    throw std::invalid_argument("scalarize: weights sum to zero");

  switch (cfg.method) {
    case ScalarizationMethod::weighted_sum:
      return weighted;
    case ScalarizationMethod::chebyshev:
      return cheby;
    case ScalarizationMethod::augmented_chebyshev:
      if (!(cfg.rho > 0.0))
        throw std::invalid_argument("scalarize: rho must be positive");
      return cheby + cfg.rho * weighted;
  }
  throw std::logic_error("scalarize: unknown method");
}

NoiseProfile quantify_noise(const std::vector<ObjectiveVector>& replicates) {
  if (replicates.size() < 2)
    throw std::invalid_argument("quantify_noise: need at least 2 replicates");
  const std::size_t s = replicates.front().y.size();
  for (const auto& r : replicates)
    if (r.y.size() != s ||
        r.descriptor_ids != replicates.front().descriptor_ids)
      throw std::invalid_argument("quantify_noise: inconsistent replicates");

  NoiseProfile profile;
  profile.descriptor_ids = replicates.front().descriptor_ids;
  profile.replicates = int(replicates.size());
  const double m = double(replicates.size());
  for (std::size_t i = 0; i < s; ++i) {
    double mean = 0.0;
    for (const auto& r : replicates) mean += r.y[i];
    mean /= m;
    double var = 0.0;
    for (const auto& r : replicates) var += (r.y[i] - mean) * (r.y[i] - mean);
    var /= (m - 1.0);
    profile.per_objective_mean.push_back(mean);
    profile.per_objective_variance.push_back(var);
    profile.total_mean += mean;
    profile.total_variance += var;
  }
  return profile;
}

std::vector<std::vector<double>> objective_correlations(
    const std::vector<ObjectiveVector>& trials) {
  if (trials.size() < 3)
    throw std::invalid_argument(
        "objective_correlations: need at least 3 trials");
  const std::size_t s = trials.front().y.size();
  for (const auto& t : trials)
    if (t.y.size() != s)
      throw std::invalid_argument("objective_correlations: ragged trials");

  const double m = double(trials.size());
  std::vector<double> mean(s, 0.0);
  for (const auto& t : trials)
    for (std::size_t i = 0; i < s; ++i) mean[i] += t.y[i];
  for (auto& v : mean) v /= m;

  std::vector<std::vector<double>> cov(s, std::vector<double>(s, 0.0));
  for (const auto& t : trials)
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        cov[i][j] += (t.y[i] - mean[i]) * (t.y[j] - mean[j]);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> r2(s, std::vector<double>(s, 1.0));
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double denom = cov[i][i] * cov[j][j];
      const double value =
          denom > 0.0 ? (cov[i][j] * cov[i][j]) / denom : nan;
      r2[i][j] = r2[j][i] = value;
    }
  return r2;
}

void write_density_csv(const Density& d, std::ostream& out) {
  out << "grid,value\n" << std::setprecision(12);
  for (std::size_t i = 0; i < d.grid.size(); ++i)
    out << d.grid[i] << ',' << d.values[i] << '\n';
}

void write_noise_csv(const NoiseProfile& profile, std::ostream& out) {
  out << "descriptor_id,mean,variance\n" << std::setprecision(12);
  for (std::size_t i = 0; i < profile.descriptor_ids.size(); ++i)
    out << profile.descriptor_ids[i] << ',' << profile.per_objective_mean[i]
        << ',' << profile.per_objective_variance[i] << '\n';
  out << "total," << profile.total_mean << ',' << profile.total_variance
      << '\n';
}

void write_correlations_csv(const std::vector<int>& descriptor_ids,
                            const std::vector<std::vector<double>>& r2,
                            std::ostream& out) {
  out << "descriptor_id";
  for (int id : descriptor_ids) out << ",d" << id;
  out << '\n' << std::setprecision(12);
  for (std::size_t i = 0; i < r2.size(); ++i) {
    out << 'd' << descriptor_ids[i];
    for (double v : r2[i]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace microcal
