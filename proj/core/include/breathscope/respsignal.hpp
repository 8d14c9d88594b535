#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "breathscope/cloud.hpp"

namespace breathscope {

/// Regular x-y lattice in camera-frame millimetres.
struct LatticeSpec {
  double origin_x_mm = 0.0;
  double origin_y_mm = 0.0;
  double cell_mm = 5.0;
  int nx = 1;
  int ny = 1;

  bool same_as(const LatticeSpec& o) const {
    return origin_x_mm == o.origin_x_mm && origin_y_mm == o.origin_y_mm &&
           cell_mm == o.cell_mm && nx == o.nx && ny == o.ny;
  }
};

/// Per-cell mean depth; NaN marks empty cells.
struct DepthGrid {
  LatticeSpec lattice;
  std::vector<double> z_mm;

  bool valid(int ix, int iy) const;
  double at(int ix, int iy) const {
    return z_mm[static_cast<std::size_t>(iy) * lattice.nx + ix];
  }
  int valid_count() const;
  double cell_center_x(int ix) const {
    return lattice.origin_x_mm + (ix + 0.5) * lattice.cell_mm;
  }
  double cell_center_y(int iy) const {
    return lattice.origin_y_mm + (iy + 0.5) * lattice.cell_mm;
  }
};

/// Lattice covering the x-y footprint of a cloud at the given cell size.
LatticeSpec lattice_covering(const PointCloud& cloud, double cell_mm);

DepthGrid depth_grid_from_cloud(const PointCloud& cloud,
                                const LatticeSpec& lattice);

/// Median over cells valid in both grids (restricted to roi, judged at the
/// cell center with the reference depth) of reference.z - frame.z. Positive
/// means the surface moved toward the camera. Raises a coverage error when
/// the valid overlap is below min_coverage of the reference's valid cells.
double depth_delta(const DepthGrid& frame, const DepthGrid& reference,
                   const RoiBox& roi, double min_coverage = 0.25);

/// Uniformly sampled depth-vs-time signal, mean already removed.
struct RespSeries {
  std::vector<double> depth_mm;
  double fs_hz = 0.0;

  std::size_t size() const { return depth_mm.size(); }
  double t(std::size_t i) const { return static_cast<double>(i) / fs_hz; }
  double duration_s() const { return static_cast<double>(size()) / fs_hz; }
};

RespSeries build_series(const std::vector<double>& deltas_mm, double fs_hz);

/// DFT bins of the zero-padded series. bin k sits at k*fs/N.
struct Spectrum {
  std::vector<std::complex<double>> bins;
  std::size_t transform_length = 0;  // padded length N (power of two)
  std::size_t source_length = 0;     // true series length before padding
  double fs_hz = 0.0;

  double freq(std::size_t k) const {
    return static_cast<double>(k) * fs_hz / static_cast<double>(transform_length);
  }
  double magnitude(std::size_t k) const { return std::abs(bins[k]); }
};

/// Forward DFT, zero-padded to the next power of two (radix-2).
Spectrum fft(const RespSeries& series);

struct PlausibleBand {
  double lo_hz = 0.08;
  double hi_hz = 1.5;
};

struct BandSelection {
  double f_lo_hz = 0.0;
  double f_hi_hz = 0.0;
};

/// Frequency of the max-magnitude bin within the plausible range (DC
/// excluded). Raises a no-signal error when the range holds no energy.
double spectral_peak_hz(const Spectrum& spectrum, const PlausibleBand& plausible);

/// Band of +-margin around the dominant peak, clamped to the plausible range.
BandSelection select_band(const Spectrum& spectrum,
                          const PlausibleBand& plausible = {},
                          double margin_hz = 0.1);

/// Spectral masking band-pass: bins (and conjugate mirrors) outside
/// [f_lo, f_hi] are zeroed and the series inverse-transformed. Uses an
/// exact-length transform so the operation is a true projection (applying
/// the same band twice equals applying it once).
RespSeries bandpass(const RespSeries& series, const BandSelection& band);

struct PeakParams {
  double min_prominence_mult = 0.5;  // times the series standard deviation
  double min_spacing_s = 1.0;        // closer peaks: the higher one wins
};

/// Indices of breath peaks: plateau-aware local maxima filtered by relative
/// prominence and minimum spacing.
std::vector<std::size_t> find_breath_peaks(const RespSeries& series,
                                           const PeakParams& params = {});

int count_breaths(const RespSeries& series, const PeakParams& params = {});

enum class AgeBand { under6, six_to_twelve, unspecified };
enum class Classification { below_range, normal, above_range };

const char* age_band_name(AgeBand band);
const char* classification_name(Classification c);

/// Age-banded rate thresholds: under 6 years normal is 22-34 breaths/min,
/// 6-12 years 18-30 breaths/min (both closed intervals). With no age given,
/// the count is scaled to a 30 s window: above 17 flags above_range, below
/// 10 flags below_range.
Classification classify(int breath_count, double duration_s, AgeBand age);

/// Maximum positive deviation from the zero-mean intermediary state.
double max_excursion(const RespSeries& series);

struct BreathReport {
  int breath_count = 0;
  double duration_s = 0.0;
  double bpm = 0.0;
  AgeBand age_band = AgeBand::unspecified;
  Classification classification = Classification::normal;
  double max_excursion_mm = 0.0;
};

BreathReport make_breath_report(const RespSeries& filtered, int breath_count,
                                AgeBand age);

}  // namespace breathscope
