#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "microcal/descriptors.hpp"

namespace microcal {

// Raised when a sample population is too small (or degenerate) to smooth
// into a density; campaigns translate this into a failed trial.
struct InsufficientSamplesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  int points = 512;
};

// KDE-smoothed probability density on a fixed evaluation grid. Values are
// floored at kDensityFloor and the trapezoidal integral is 1 (to 1e-6).
struct Density {
  std::vector<double> grid;
  std::vector<double> values;
  double bandwidth = 0.0;
};

constexpr double kDensityFloor = 1e-12;

// Gaussian-kernel KDE with Scott's-rule bandwidth h = sigma * n^(-1/5),
// evaluated on a uniform 512-point grid over [min - 3h, max + 3h] unless
// `grid` overrides.
Density kde(const std::vector<double>& samples,
            std::optional<GridSpec> grid = std::nullopt);

// KL(target || candidate) = integral of p_t * log(p_t / p_c), trapezoidal,
// after resampling both densities onto a common uniform grid spanning the
// union of their supports. Nonnegative; identical inputs give exactly 0.
double kl_divergence(const Density& target, const Density& candidate,
                     int grid_points = 512);

struct ObjectiveVector {
  std::vector<int> descriptor_ids;
  std::vector<double> y;  // one KL value per descriptor, Table-2 order
};

// Per-descriptor KL divergences of candidate sample populations against
// prebuilt target densities. Descriptor id sets must match exactly.
ObjectiveVector objective_vector(const std::vector<int>& descriptor_ids,
                                 const std::vector<Density>& target_densities,
                                 const std::vector<DescriptorSamples>& candidate);
ObjectiveVector objective_vector(const std::vector<DescriptorSamples>& target,
                                 const std::vector<DescriptorSamples>& candidate);

enum class ScalarizationMethod { weighted_sum, chebyshev, augmented_chebyshev };

struct ScalarizationConfig {
  ScalarizationMethod method = ScalarizationMethod::weighted_sum;
  std::vector<double> weights;      // empty: all ones
  std::vector<double> ideal_point;  // empty: all zeros
  double rho = 0.05;                // augmented-Chebyshev term
};

double scalarize(const std::vector<double>& y, const ScalarizationConfig& cfg);
inline double scalarize(const ObjectiveVector& v,
                        const ScalarizationConfig& cfg) {
  return scalarize(v.y, cfg);
}

// Aleatory-noise summary over replicate evaluations at one input.
struct NoiseProfile {
  std::vector<int> descriptor_ids;
  std::vector<double> per_objective_mean;
  std::vector<double> per_objective_variance;  // unbiased
  double total_mean = 0.0;
  double total_variance = 0.0;
  int replicates = 0;
};

NoiseProfile quantify_noise(const std::vector<ObjectiveVector>& replicates);

// Pairwise squared Pearson correlation between objective columns across
// trials; symmetric with unit diagonal. A zero-variance column yields NaN
// off-diagonal entries rather than an error.
std::vector<std::vector<double>> objective_correlations(
    const std::vector<ObjectiveVector>& trials);

void write_density_csv(const Density& d, std::ostream& out);
void write_noise_csv(const NoiseProfile& profile, std::ostream& out);
void write_correlations_csv(const std::vector<int>& descriptor_ids,
                            const std::vector<std::vector<double>>& r2,
                            std::ostream& out);

}  // namespace microcal
