#include "microcal/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace microcal {

namespace {

// Collects run lengths of maximal constant-label segments along one row or
// column. A run is emitted only if its grain passed the filter (keep mask);
// an empty mask keeps everything. Runs within one line never span grains:
// consecutive equal labels are 4-connected by construction.
void collect_runs(const Microstructure& ms, Axis axis, int index,
                  const std::vector<std::uint8_t>& keep,
                  std::vector<double>& out) {
  const int n = axis == Axis::x ? ms.width : ms.length;
  auto label_at = [&](int i) {
    return axis == Axis::x ? ms.at(i, index) : ms.at(index, i);
  };
  auto kept_at = [&](int i) {
    if (keep.empty()) return true;
    const std::size_t site = axis == Axis::x
                                 ? std::size_t(index) * ms.width + i
                                 : std::size_t(i) * ms.width + index;
    return keep[site] != 0;
  };
  int run_start = 0;
  for (int i = 1; i <= n; ++i) {
    if (i == n || label_at(i) != label_at(run_start)) {
      if (kept_at(run_start)) out.push_back(double(i - run_start));
      run_start = i;
    }
  }
}

std::vector<std::uint8_t> keep_mask(const Microstructure& ms,
                                    const std::vector<Grain>& kept) {
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(ms.site_count()), 0);
  for (const auto& g : kept)
    for (const auto& [x, y] : g.sites)
      keep[std::size_t(y) * ms.width + std::size_t(x)] = 1;
  return keep;
}

}  // namespace

std::vector<int> BandConfig::band_rows(const Microstructure& ms,
                                       int band_index) const {
  if (band_width < 1) throw std::invalid_argument("band_width must be >= 1");
  if (band_index < 0 || band_index >= num_bands)
    throw std::out_of_range("band index outside [0, num_bands)");
  const int axis = resolved_axis(ms);
  const int offset = band_index * (band_width + band_spacing);
  const int lo = axis + offset - band_width / 2;
  std::vector<int> rows;
  for (int y = lo; y < lo + band_width; ++y) {
    rows.push_back(y);
    const int mirrored = 2 * axis - y;
    if (mirrored != y) rows.push_back(mirrored);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  if (rows.front() < 0 || rows.back() >= ms.length)
    throw std::out_of_range("band falls outside the lattice");
  return rows;
}

std::vector<Grain> segment_grains(const Microstructure& ms) {
  std::vector<Grain> grains;
  std::vector<std::int32_t> owner(static_cast<std::size_t>(ms.site_count()), -1);
  std::vector<std::pair<int, int>> stack;
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  for (int y0 = 0; y0 < ms.length; ++y0)
    for (int x0 = 0; x0 < ms.width; ++x0) {
      if (owner[std::size_t(y0) * ms.width + x0] >= 0) continue;
      const std::int32_t label = ms.at(x0, y0);
      const std::int32_t id = std::int32_t(grains.size());
      Grain g;
      g.label = label;
      stack.assign(1, {x0, y0});
      owner[std::size_t(y0) * ms.width + x0] = id;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        g.sites.emplace_back(x, y);
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k];
          const int ny = y + dy[k];
          if (!ms.in_bounds(nx, ny) || ms.at(nx, ny) != label) continue;
          auto& o = owner[std::size_t(ny) * ms.width + nx];
          if (o >= 0) continue;
          o = id;
          stack.emplace_back(nx, ny);
        }
      }
      grains.push_back(std::move(g));
    }
  return grains;
}

EllipseFit fit_ellipse(const Grain& grain) {
  if (grain.sites.empty())
    throw std::invalid_argument("fit_ellipse: empty grain");
  const double n = double(grain.sites.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : grain.sites) {
    sx += x;
    sy += y;
  }
  EllipseFit fit;
  fit.xc = sx / n;
  fit.yc = sy / n;
  // second central moments with the 1/12 unit-square correction per site
  double mxx = 1.0 / 12.0, myy = 1.0 / 12.0, mxy = 0.0;
  for (const auto& [x, y] : grain.sites) {
    const double dx = x - fit.xc;
    const double dy = y - fit.yc;
    mxx += dx * dx / n;
    myy += dy * dy / n;
    mxy += dx * dy / n;
  }
  const double trace_half = 0.5 * (mxx + myy);
  const double det_part =
      std::sqrt(0.25 * (mxx - myy) * (mxx - myy) + mxy * mxy);
  const double lam_max = trace_half + det_part;
  const double lam_min = std::max(0.0, trace_half - det_part);
  fit.a = 2.0 * std::sqrt(lam_max);
  fit.b = 2.0 * std::sqrt(lam_min);
  fit.theta = 0.5 * std::atan2(2.0 * mxy, mxx - myy);
  if (fit.theta < 0.0) fit.theta += std::numbers::pi;
  if (fit.theta >= std::numbers::pi) fit.theta -= std::numbers::pi;
  return fit;
}

DescriptorSamples chord_lengths(const Microstructure& ms, Axis axis) {
  DescriptorSamples out;
  out.descriptor_id = axis == Axis::x ? 5 : 6;
  const int lines = axis == Axis::x ? ms.length : ms.width;
  for (int i = 0; i < lines; ++i) collect_runs(ms, axis, i, {}, out.samples);
  return out;
}

DescriptorSamples banded_chord_lengths(const Microstructure& ms,
                                       const BandConfig& bands,
                                       int band_index) {
  DescriptorSamples out;
  out.descriptor_id = 7 + band_index;
  for (int row : bands.band_rows(ms, band_index))
    collect_runs(ms, Axis::x, row, {}, out.samples);
  return out;
}

std::vector<Grain> apply_filter(std::vector<Grain> grains,
                                const FilterConfig& filter) {
  if (!filter.enabled) return grains;
  std::erase_if(grains, [&](const Grain& g) {
    return !(double(g.area()) > filter.area_threshold);
  });
  return grains;
}

std::vector<DescriptorSamples> compute_descriptors(
    const Microstructure& ms, const std::vector<int>& descriptor_set,
    const FilterConfig& filter, const BandConfig& bands) {
  std::vector<int> ids = descriptor_set;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids)
    if (id < 1 || id > kNumDescriptors)
      throw std::invalid_argument("descriptor id outside 1..11");

  const std::vector<Grain> kept = apply_filter(segment_grains(ms), filter);
  const bool wants_chords =
      std::any_of(ids.begin(), ids.end(), [](int id) { return id >= 5; });
  std::vector<std::uint8_t> keep;
  if (wants_chords && filter.enabled) keep = keep_mask(ms, kept);

  std::vector<EllipseFit> fits;
  if (std::any_of(ids.begin(), ids.end(), [](int id) { return id <= 3; })) {
    fits.reserve(kept.size());
    for (const auto& g : kept) fits.push_back(fit_ellipse(g));
  }

  std::vector<DescriptorSamples> result;
  for (int id : ids) {
    DescriptorSamples s;
    s.descriptor_id = id;
    switch (id) {
      case 1:
        for (const auto& f : fits) s.samples.push_back(f.a);
        break;
      case 2:
        for (const auto& f : fits) s.samples.push_back(f.b);
        break;
      case 3:
        for (const auto& f : fits) s.samples.push_back(f.theta);
        break;
      case 4:
        for (const auto& g : kept) s.samples.push_back(double(g.area()));
        break;
      case 5:
      case 6: {
        const Axis axis = id == 5 ? Axis::x : Axis::y;
        const int lines = axis == Axis::x ? ms.length : ms.width;
        for (int i = 0; i < lines; ++i)
          collect_runs(ms, axis, i, keep, s.samples);
        break;
      }
      default:
        for (int row : bands.band_rows(ms, id - 7))
          collect_runs(ms, Axis::x, row, keep, s.samples);
        break;
    }
    result.push_back(std::move(s));
  }
  return result;
}

void write_samples_csv(const std::vector<DescriptorSamples>& all,
                       std::ostream& out) {
  out << "descriptor_id,value\n";
  for (const auto& d : all)
    for (double v : d.samples) out << d.descriptor_id << ',' << v << '\n';
}

}  // namespace microcal
