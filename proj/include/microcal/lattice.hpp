#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "microcal/rng.hpp"

namespace microcal {

// 2D site lattice of integer grain labels ("spins"). Row-major storage:
// x in [0, width) runs along a row, y in [0, length) indexes rows. For the
// weld model, x is the travel direction and the weld axis is the centerline
// row y = length / 2. Free (non-periodic) boundaries, 4-neighborhood.
struct Microstructure {
  int width = 0;
  int length = 0;
  std::vector<std::int32_t> spins;

  std::int64_t site_count() const { return std::int64_t(width) * length; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < length;
  }
  std::int32_t at(int x, int y) const {
    return spins[std::size_t(y) * std::size_t(width) + std::size_t(x)];
  }
  std::int32_t& at(int x, int y) {
    return spins[std::size_t(y) * std::size_t(width) + std::size_t(x)];
  }
};

// Neighbor stencil for bond energies and the flip move set. Descriptors
// always use 4-connectivity. The simulators default to the 8-neighbor
// stencil with diagonal bonds at half weight: von Neumann dynamics facet
// and pin at low temperature, which inverts the expected
// grain-size-vs-temperature trend over the calibration range.
enum class Stencil { von_neumann, moore };

enum class MobilityMode { constant, arrhenius };

// Grain-boundary mobility prefactor. In arrhenius mode the Boltzmann factor
// M0 exp(-Q / kB T) is clamped to (0, 1] so it can scale an acceptance
// probability directly.
struct MobilityModel {
  MobilityMode mode = MobilityMode::constant;
  double prefactor = 1.0;    // M0
  double activation = 0.0;   // Q, energy units
  double temperature = 1.0;  // T, energy / kB

  double value() const;
};

struct GrainGrowthParams {
  int width = 256;
  int length = 256;
  int num_spins = 2000;  // q, distinct labels in the initial condition
  double kbts = 0.5;     // simulation temperature, bond-energy units
  int steps = 100;       // Monte Carlo sweeps
  std::uint64_t seed = 0;
  MobilityModel mobility;
  Stencil stencil = Stencil::moore;
  // Fraction of attempts proposing a uniform label from [0, q) instead of
  // an unlike neighbor. The thermal channel is what makes grain size fall
  // with temperature (fluctuation-driven nucleation and boundary drag);
  // with 0 the move set is purely curvature-driven.
  double thermal_fraction = 0.25;
};

enum class PoolShape { teardrop, ellipse };

struct WeldParams {
  int width = 256;         // travel (x) extent, sites
  int length = 512;        // lateral extent (rows), sites
  double velocity = 15.0;  // pool advance per MCS, sites
  double haz = 150.0;      // heat-affected-zone depth, sites
  double pool_width = 200.0;
  PoolShape pool_shape = PoolShape::teardrop;
  double kbts = 0.25;
  std::uint64_t seed = 0;
  Stencil stencil = Stencil::moore;
};

// Every site gets an independent uniform label in [0, num_spins).
Microstructure init_microstructure(int width, int length, int num_spins,
                                   std::uint64_t seed);

// Count of stencil neighbors whose label differs from (x, y); bond
// energy 1.
int site_energy(const Microstructure& ms, int x, int y,
                Stencil stencil = Stencil::von_neumann);

// Sum of site_energy over all sites = 2x the number of unlike bonds.
std::int64_t total_boundary_energy(const Microstructure& ms,
                                   Stencil stencil = Stencil::von_neumann);

// Energy the simulators evolve under: unlike von Neumann bonds weigh 1,
// unlike diagonal bonds 1/2 (exact in binary, so bookkeeping is exact).
double dynamics_site_energy(const Microstructure& ms, int x, int y,
                            Stencil stencil);
double total_dynamics_energy(const Microstructure& ms, Stencil stencil);

// Metropolis acceptance with mobility prefactor:
//   P = M                      if delta_e <= 0
//   P = M exp(-delta_e / kbts) if delta_e > 0  (0 when kbts == 0)
double acceptance_probability(double delta_e, double kbts, double mobility);

// Attempts to set (x, y) to `candidate` (normally a label drawn from the
// site's unlike neighbors). Mutates the lattice only on acceptance.
bool metropolis_flip(Microstructure& ms, int x, int y, std::int32_t candidate,
                     double kbts, double mobility, Rng& rng,
                     Stencil stencil = Stencil::von_neumann);

// Called with (x, y, old_label, new_label, delta_e) on each accepted flip;
// delta_e is in dynamics-energy units (multiples of 1/2).
using FlipObserver =
    std::function<void(int, int, std::int32_t, std::int32_t, double)>;

// Isothermal curvature-driven grain growth: steps sweeps of width*length
// random flip attempts, candidate labels drawn from unlike neighbors.
Microstructure run_grain_growth(const GrainGrowthParams& params,
                                const FlipObserver& observer = {});

// Pure pool-shape predicate. The pool is symmetric about the weld axis row
// center_y. Teardrop: semicircular nose of radius pool_width/2 ahead of the
// center blended into a linear taper of length pool_width behind it.
// Ellipse: circle of diameter pool_width.
bool pool_contains(PoolShape shape, double pool_width, double center_x,
                   double center_y, double x, double y);

// The fine equiaxed base metal a weld pass starts from (q = sites/16
// labels, 5 sweeps at kbts = 0). Sites the pass never heats retain these
// labels exactly.
Microstructure weld_base_metal(const WeldParams& params);

// Moving-pool weld pass over a fine-grained base metal: melt inside the
// pool, epitaxial re-solidification at the trailing boundary, Metropolis
// coarsening in the heat-affected zone with mobility ramping 1 -> 0 over
// haz sites, frozen beyond.
Microstructure run_weld(const WeldParams& params);

// MSV1 interchange format: "MSV1 <width> <length>" then `length` lines of
// `width` space-separated labels, trailing newline.
void write_msv1(const Microstructure& ms, std::ostream& out);
void write_msv1_file(const Microstructure& ms, const std::string& path);
Microstructure read_msv1(std::istream& in);
Microstructure read_msv1_file(const std::string& path);

}  // namespace microcal
