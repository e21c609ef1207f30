#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "microcal/lattice.hpp"

namespace microcal {

// Maximal 4-connected constant-label region. Disconnected regions sharing a
// spin label are distinct grains.
struct Grain {
  std::int32_t label = 0;
  std::vector<std::pair<int, int>> sites;  // (x, y)

  int area() const { return int(sites.size()); }
};

// Moment-equivalent ellipse of a grain: a/b are the semi-axes of the ellipse
// with the grain's second central moments, theta the major-axis orientation
// in [0, pi).
struct EllipseFit {
  double a = 0.0;
  double b = 0.0;
  double theta = 0.0;
  double xc = 0.0;
  double yc = 0.0;
};

// Horizontal sampling bands for the local chord-length descriptors d7-d11.
// Band k is the union of a row interval centered band_offset(k) rows above
// the weld axis and its mirror image below it; band 0 straddles the axis.
struct BandConfig {
  int band_width = 60;
  int band_spacing = 20;
  int num_bands = 5;
  int axis_y = -1;  // < 0: lattice centerline, length / 2

  int resolved_axis(const Microstructure& ms) const {
    return axis_y >= 0 ? axis_y : ms.length / 2;
  }
  // Sorted distinct row indices of band `band_index`; throws if the band
  // falls outside the lattice or the index is out of range.
  std::vector<int> band_rows(const Microstructure& ms, int band_index) const;
};

struct FilterConfig {
  bool enabled = true;
  double area_threshold = 150.0;  // keep grains with area > threshold
};

// Raw sample population of one Table-2 descriptor (ids 1..11):
// 1 ellipse a, 2 ellipse b, 3 ellipse theta, 4 grain area, 5 x-chords,
// 6 y-chords, 7..11 banded x-chords (bands 0..4).
struct DescriptorSamples {
  int descriptor_id = 0;
  std::vector<double> samples;

  int count() const { return int(samples.size()); }
  bool insufficient() const { return samples.size() < 2; }
};

constexpr int kNumDescriptors = 11;

// Partition of all sites into grains, ordered by row-major discovery.
std::vector<Grain> segment_grains(const Microstructure& ms);

EllipseFit fit_ellipse(const Grain& grain);

enum class Axis { x, y };

// Lengths of all maximal constant-label runs along every row (x) or column
// (y); boundary-truncated runs included.
DescriptorSamples chord_lengths(const Microstructure& ms, Axis axis);

// x-direction run lengths over all rows of band `band_index`, both sides of
// the weld axis pooled.
DescriptorSamples banded_chord_lengths(const Microstructure& ms,
                                       const BandConfig& bands,
                                       int band_index);

std::vector<Grain> apply_filter(std::vector<Grain> grains,
                                const FilterConfig& filter);

// Full Algorithm-1 front end (excluding the KDE step): segment, filter,
// then compute the requested descriptors. Grain-based descriptors (d1-d4)
// use the filtered grains; chord descriptors (d5-d11) only sample runs
// inside grains that passed the filter.
std::vector<DescriptorSamples> compute_descriptors(
    const Microstructure& ms, const std::vector<int>& descriptor_set,
    const FilterConfig& filter, const BandConfig& bands);

// Audit CSV, one "descriptor_id,value" row per sample.
void write_samples_csv(const std::vector<DescriptorSamples>& all,
                       std::ostream& out);

}  // namespace microcal
