#include "microcal/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace microcal {

namespace {

constexpr std::int32_t kMolten = -1;

// von Neumann neighbors first, then the diagonals of the Moore stencil
const int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
const int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

int neighbor_count(Stencil stencil) {
  return stencil == Stencil::von_neumann ? 4 : 8;
}

// Distinct labels among in-bounds stencil neighbors that differ from the
// site's own label. `skip` labels (the molten sentinel in the weld model)
// are never candidates. Returns the count, labels written into out[0..7].
int unlike_neighbor_labels(const Microstructure& ms, int x, int y,
                           std::int32_t skip, int neighbors,
                           std::int32_t out[8]) {
  const std::int32_t own = ms.at(x, y);
  int n = 0;
  for (int k = 0; k < neighbors; ++k) {
    const int nx = x + kDx[k];
    const int ny = y + kDy[k];
    if (!ms.in_bounds(nx, ny)) continue;
    const std::int32_t lab = ms.at(nx, ny);
    if (lab == own || lab == skip) continue;
    bool seen = false;
    for (int j = 0; j < n; ++j) seen = seen || out[j] == lab;
    if (!seen) out[n++] = lab;
  }
  return n;
}

int unlike_count(const Microstructure& ms, int x, int y, std::int32_t label,
                 int neighbors) {
  int e = 0;
  for (int k = 0; k < neighbors; ++k) {
    const int nx = x + kDx[k];
    const int ny = y + kDy[k];
    if (ms.in_bounds(nx, ny) && ms.at(nx, ny) != label) ++e;
  }
  return e;
}

// diagonal bonds carry half weight; multiples of 1/2 stay exact in double
double weighted_unlike(const Microstructure& ms, int x, int y,
                       std::int32_t label, int neighbors) {
  double e = 0.0;
  for (int k = 0; k < neighbors; ++k) {
    const int nx = x + kDx[k];
    const int ny = y + kDy[k];
    if (ms.in_bounds(nx, ny) && ms.at(nx, ny) != label)
      e += k < 4 ? 1.0 : 0.5;
  }
  return e;
}

// One flip attempt. The curvature channel proposes a label drawn from the
// site's unlike neighbors; attempts at sites with no unlike neighbor are
// skipped but still count toward the sweep. With thermal_q > 0, a
// thermal_fraction share of attempts instead proposes a uniform label from
// [0, thermal_q). Molten bonds contribute equally before and after a flip,
// so they cancel in delta_e; `skip` only has to guard the candidate draw.
bool attempt_flip(Microstructure& ms, int x, int y, double kbts,
                  double mobility, Rng& rng, std::int32_t skip, int neighbors,
                  std::int32_t thermal_q, double thermal_fraction,
                  const FlipObserver& observer) {
  std::int32_t candidate;
  if (thermal_q > 0 && thermal_fraction > 0.0 &&
      rng.uniform() < thermal_fraction) {
    candidate = std::int32_t(rng.uniform_int(std::uint64_t(thermal_q)));
    if (candidate == ms.at(x, y)) return false;
  } else {
    std::int32_t labels[8];
    const int n = unlike_neighbor_labels(ms, x, y, skip, neighbors, labels);
    if (n == 0) return false;
    candidate = labels[n == 1 ? 0 : int(rng.uniform_int(std::uint64_t(n)))];
  }
  const std::int32_t old = ms.at(x, y);
  const double e_before = weighted_unlike(ms, x, y, old, neighbors);
  const double e_after = weighted_unlike(ms, x, y, candidate, neighbors);
  const double delta_e = e_after - e_before;
  const double p = acceptance_probability(delta_e, kbts, mobility);
  if (p < 1.0 && rng.uniform() >= p) return false;
  ms.at(x, y) = candidate;
  if (observer) observer(x, y, old, candidate, delta_e);
  return true;
}

void sweep(Microstructure& ms, double kbts, double mobility, Rng& rng,
           int neighbors, std::int32_t thermal_q, double thermal_fraction,
           const FlipObserver& observer) {
  const std::int64_t n = ms.site_count();
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint64_t site = rng.uniform_int(std::uint64_t(n));
    const int x = int(site % std::uint64_t(ms.width));
    const int y = int(site / std::uint64_t(ms.width));
    attempt_flip(ms, x, y, kbts, mobility, rng, kMolten, neighbors, thermal_q,
                 thermal_fraction, observer);
  }
}

}  // namespace

double MobilityModel::value() const {
  if (prefactor <= 0.0)
    throw std::invalid_argument("mobility prefactor must be positive");
  if (mode == MobilityMode::constant) {
    if (prefactor > 1.0)
      throw std::invalid_argument("constant mobility must be in (0, 1]");
    return prefactor;
  }
  if (temperature <= 0.0)
    throw std::invalid_argument("arrhenius mobility needs temperature > 0");
  const double m = prefactor * std::exp(-activation / temperature);
  return std::min(1.0, std::max(m, 1e-300));
}

Microstructure init_microstructure(int width, int length, int num_spins,
                                   std::uint64_t seed) {
  if (width < 1 || length < 1)
    throw std::invalid_argument("init_microstructure: zero-area domain");
  if (num_spins < 2)
    throw std::invalid_argument("init_microstructure: need at least 2 spins");
  Microstructure ms;
  ms.width = width;
  ms.length = length;
  ms.spins.resize(static_cast<std::size_t>(ms.site_count()));
  Rng rng(seed);
  for (auto& s : ms.spins)
    s = std::int32_t(rng.uniform_int(std::uint64_t(num_spins)));
  return ms;
}

int site_energy(const Microstructure& ms, int x, int y, Stencil stencil) {
  if (!ms.in_bounds(x, y))
    throw std::out_of_range("site_energy: coordinates outside lattice");
  return unlike_count(ms, x, y, ms.at(x, y), neighbor_count(stencil));
}

double dynamics_site_energy(const Microstructure& ms, int x, int y,
                            Stencil stencil) {
  if (!ms.in_bounds(x, y))
    throw std::out_of_range("site_energy: coordinates outside lattice");
  return weighted_unlike(ms, x, y, ms.at(x, y), neighbor_count(stencil));
}

double total_dynamics_energy(const Microstructure& ms, Stencil stencil) {
  double e = 0.0;
  for (int y = 0; y < ms.length; ++y)
    for (int x = 0; x < ms.width; ++x)
      e += weighted_unlike(ms, x, y, ms.at(x, y), neighbor_count(stencil));
  return e;
}

std::int64_t total_boundary_energy(const Microstructure& ms,
                                   Stencil stencil) {
  std::int64_t e = 0;
  for (int y = 0; y < ms.length; ++y)
    for (int x = 0; x < ms.width; ++x)
      e += unlike_count(ms, x, y, ms.at(x, y), neighbor_count(stencil));
  return e;
}

double acceptance_probability(double delta_e, double kbts, double mobility) {
  if (kbts < 0.0)
    throw std::invalid_argument("simulation temperature must be >= 0");
  if (mobility <= 0.0 || mobility > 1.0)
    throw std::invalid_argument("mobility must be in (0, 1]");
  if (delta_e <= 0.0) return mobility;
  if (kbts == 0.0) return 0.0;
  return mobility * std::exp(-delta_e / kbts);
}

bool metropolis_flip(Microstructure& ms, int x, int y, std::int32_t candidate,
                     double kbts, double mobility, Rng& rng, Stencil stencil) {
  if (!ms.in_bounds(x, y))
    throw std::out_of_range("metropolis_flip: coordinates outside lattice");
  if (kbts < 0.0)
    throw std::invalid_argument("simulation temperature must be >= 0");
  if (mobility <= 0.0 || mobility > 1.0)
    throw std::invalid_argument("mobility must be in (0, 1]");
  const std::int32_t old = ms.at(x, y);
  const int neighbors = neighbor_count(stencil);
  const double e_before = weighted_unlike(ms, x, y, old, neighbors);
  const double e_after = weighted_unlike(ms, x, y, candidate, neighbors);
  const double p =
      acceptance_probability(e_after - e_before, kbts, mobility);
  if (p < 1.0 && rng.uniform() >= p) return false;
  ms.at(x, y) = candidate;
  return true;
}

Microstructure run_grain_growth(const GrainGrowthParams& params,
                                const FlipObserver& observer) {
  if (params.kbts < 0.0)
    throw std::invalid_argument("simulation temperature must be >= 0");
  if (params.steps < 0)
    throw std::invalid_argument("steps must be >= 0");
  const double mobility = params.mobility.value();
  Microstructure ms = init_microstructure(params.width, params.length,
                                          params.num_spins, params.seed);
  Rng rng(derive_seed(params.seed, 1));
  const int neighbors = neighbor_count(params.stencil);
  for (int step = 0; step < params.steps; ++step)
    sweep(ms, params.kbts, mobility, rng, neighbors, params.num_spins,
          params.thermal_fraction, observer);
  return ms;
}

bool pool_contains(PoolShape shape, double pool_width, double center_x,
                   double center_y, double x, double y) {
  const double r = pool_width / 2.0;
  const double dx = x - center_x;
  const double dy = y - center_y;
  if (std::abs(dy) > r) return false;
  if (shape == PoolShape::ellipse || dx >= 0.0)
    return dx * dx + dy * dy <= r * r;
  // teardrop tail: linear taper over 2x the nose semi-axis
  const double tail = pool_width;
  if (dx < -tail) return false;
  return std::abs(dy) <= r * (1.0 + dx / tail);
}

namespace {

void validate_weld_params(const WeldParams& p) {
  if (p.width < 1 || p.length < 1)
    throw std::invalid_argument("run_weld: zero-area domain");
  if (p.pool_width <= 0.0)
    throw std::invalid_argument("run_weld: pool width must be positive");
  if (p.pool_width > std::min(p.width, p.length))
    throw std::invalid_argument("run_weld: pool wider than domain");
  if (p.velocity <= 0.0)
    throw std::invalid_argument("run_weld: velocity must be positive");
  if (p.haz < 0.0) throw std::invalid_argument("run_weld: haz must be >= 0");
  if (p.kbts < 0.0)
    throw std::invalid_argument("simulation temperature must be >= 0");
}

}  // namespace

Microstructure weld_base_metal(const WeldParams& p) {
  validate_weld_params(p);
  // fine equiaxed texture from a short zero-temperature anneal
  const int q0 = std::max(2, int(std::int64_t(p.width) * p.length / 16));
  Microstructure ms =
      init_microstructure(p.width, p.length, q0, derive_seed(p.seed, 2));
  Rng rng(derive_seed(p.seed, 3));
  const int neighbors = neighbor_count(p.stencil);
  for (int i = 0; i < 5; ++i) sweep(ms, 0.0, 1.0, rng, neighbors, 0, 0.0, {});
  return ms;
}

Microstructure run_weld(const WeldParams& p) {
  validate_weld_params(p);
  if (p.pool_width + 2.0 * p.haz > double(p.width))
    std::cerr << "run_weld: warning: pool_width + 2*haz = "
              << p.pool_width + 2.0 * p.haz << " exceeds domain width "
              << p.width << "\n";

  const int q0 = std::max(2, int(std::int64_t(p.width) * p.length / 16));
  Microstructure ms = weld_base_metal(p);
  Rng rng(derive_seed(p.seed, 4));

  const double r = p.pool_width / 2.0;
  const double tail = p.pool_shape == PoolShape::teardrop ? p.pool_width : r;
  const double cy = double(p.length) / 2.0;
  const int row_lo = std::max(0, int(std::floor(cy - r)));
  const int row_hi = std::min(p.length - 1, int(std::ceil(cy + r)));
  std::int32_t next_label = q0;

  std::vector<std::pair<int, int>> molten;
  std::vector<std::pair<int, int>> exited;
  // per-MCS visit stamps for the HAZ distance rings
  std::vector<std::uint32_t> stamp(static_cast<std::size_t>(ms.site_count()), 0);
  std::uint32_t epoch = 0;
  struct HazSite {
    int x, y;
    double mobility;
  };
  std::vector<HazSite> haz_sites;
  std::vector<std::pair<int, int>> ring, next_ring;

  const double end_x = double(p.width) + tail + p.velocity;
  for (double cx = -r; cx <= end_x; cx += p.velocity) {
    // (a) melt everything inside the pool
    const int col_lo = std::max(0, int(std::floor(cx - tail)));
    const int col_hi = std::min(p.width - 1, int(std::ceil(cx + r)));
    for (int y = row_lo; y <= row_hi; ++y)
      for (int x = col_lo; x <= col_hi; ++x)
        if (ms.at(x, y) != kMolten &&
            pool_contains(p.pool_shape, p.pool_width, cx, cy, double(x),
                          double(y))) {
          ms.at(x, y) = kMolten;
          molten.emplace_back(x, y);
        }

    // (b) solidify sites the pool has moved past, layer by layer outward
    // from the solid boundary (epitaxial growth)
    exited.clear();
    std::size_t keep = 0;
    for (const auto& site : molten) {
      if (pool_contains(p.pool_shape, p.pool_width, cx, cy, double(site.first),
                        double(site.second)))
        molten[keep++] = site;
      else
        exited.push_back(site);
    }
    molten.resize(keep);
    // Epitaxial growth swept in the travel direction: sites freeze in
    // ascending-x order, each taking its trailing (-x) neighbor's grain
    // when solid (the moving thermal gradient points along the track) and
    // otherwise the nearest solid lateral neighbor. Repeated passes handle
    // re-entrant pockets; anything never touching solid nucleates fresh.
    std::sort(exited.begin(), exited.end());
    while (!exited.empty()) {
      std::size_t still = 0;
      bool assigned = false;
      for (const auto& [x, y] : exited) {
        std::int32_t labels[4];
        int n = 0;
        std::int32_t trailing = kMolten;
        for (int k = 0; k < 4; ++k) {
          const int nx = x + kDx[k];
          const int ny = y + kDy[k];
          if (ms.in_bounds(nx, ny) && ms.at(nx, ny) != kMolten) {
            labels[n++] = ms.at(nx, ny);
            if (nx == x - 1) trailing = ms.at(nx, ny);
          }
        }
        if (n == 0) {
          exited[still++] = {x, y};
          continue;
        }
        // kAxisBias sets how often a freezing site continues the grain
        // behind it instead of competing with lateral neighbors; the
        // remainder keeps the track polycrystalline. Sites with no grain
        // behind them (the first solidified column) mostly nucleate fresh
        // grains, seeding the columnar competition.
        constexpr double kAxisBias = 0.9;
        constexpr double kEntryNucleation = 0.5;
        if (trailing != kMolten && (n == 1 || rng.uniform() < kAxisBias))
          ms.at(x, y) = trailing;
        else if (trailing == kMolten && rng.uniform() < kEntryNucleation)
          ms.at(x, y) = next_label++;
        else
          ms.at(x, y) = labels[int(rng.uniform_int(std::uint64_t(n)))];
        assigned = true;
      }
      exited.resize(still);
      if (!assigned) {
        // enclosed pocket with no solid contact: nucleate fresh grains
        for (const auto& [x, y] : exited) ms.at(x, y) = next_label++;
        break;
      }
    }

    // (c) anneal the heat-affected zone: BFS rings from the molten pool,
    // mobility ramping linearly to zero at depth haz
    if (p.haz > 0.0 && !molten.empty()) {
      ++epoch;
      haz_sites.clear();
      ring.clear();
      for (const auto& [x, y] : molten)
        stamp[std::size_t(y) * std::size_t(p.width) + std::size_t(x)] = epoch;
      ring = molten;
      const int max_depth = int(std::ceil(p.haz));
      for (int layer = 1; layer <= max_depth && !ring.empty(); ++layer) {
        const double d = double(layer - 1);
        const double mob = 1.0 - d / p.haz;
        if (mob <= 0.0) break;
        next_ring.clear();
        for (const auto& [x, y] : ring)
          for (int k = 0; k < 4; ++k) {
            const int nx = x + kDx[k];
            const int ny = y + kDy[k];
            if (!ms.in_bounds(nx, ny)) continue;
            auto& st = stamp[std::size_t(ny) * std::size_t(p.width) +
                             std::size_t(nx)];
            if (st == epoch || ms.at(nx, ny) == kMolten) continue;
            st = epoch;
            next_ring.emplace_back(nx, ny);
            haz_sites.push_back({nx, ny, mob});
          }
        ring.swap(next_ring);
      }
      const std::size_t attempts = haz_sites.size();
      for (std::size_t i = 0; i < attempts; ++i) {
        const HazSite& s =
            haz_sites[std::size_t(rng.uniform_int(attempts))];
        attempt_flip(ms, s.x, s.y, p.kbts, s.mobility, rng, kMolten,
                     neighbor_count(p.stencil), 0, 0.0, {});
      }
    }
  }

  // the pool has fully exited; nothing may remain molten
  for (const auto& s : ms.spins)
    if (s == kMolten)
      throw std::logic_error("run_weld: molten site survived the pass");
  return ms;
}

void write_msv1(const Microstructure& ms, std::ostream& out) {
  out << "MSV1 " << ms.width << ' ' << ms.length << '\n';
  for (int y = 0; y < ms.length; ++y) {
    for (int x = 0; x < ms.width; ++x) {
      if (x) out << ' ';
      out << ms.at(x, y);
    }
    out << '\n';
  }
}

void write_msv1_file(const Microstructure& ms, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_msv1(ms, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Microstructure read_msv1(std::istream& in) {
  std::string magic;
  Microstructure ms;
  if (!(in >> magic) || magic != "MSV1")
    throw std::runtime_error("not an MSV1 stream");
  if (!(in >> ms.width >> ms.length) || ms.width < 1 || ms.length < 1)
    throw std::runtime_error("MSV1: bad dimensions");
  ms.spins.resize(static_cast<std::size_t>(ms.site_count()));
  for (auto& s : ms.spins) {
    long long v;
    if (!(in >> v) || v < 0)
      throw std::runtime_error("MSV1: bad or missing label");
    s = std::int32_t(v);
  }
  return ms;
}

Microstructure read_msv1_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_msv1(in);
}

}  // namespace microcal
