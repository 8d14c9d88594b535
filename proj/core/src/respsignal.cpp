#include "breathscope/respsignal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "breathscope/error.hpp"

namespace breathscope {

bool DepthGrid::valid(int ix, int iy) const {
  return std::isfinite(at(ix, iy));
}

int DepthGrid::valid_count() const {
  int n = 0;
  for (double v : z_mm)
    if (std::isfinite(v)) ++n;
  return n;
}

LatticeSpec lattice_covering(const PointCloud& cloud, double cell_mm) {
  if (cell_mm <= 0.0)
    fail(ErrorKind::parameter, "lattice cell size must be positive");
  if (cloud.size() == 0)
    fail(ErrorKind::parameter, "cannot build a lattice over an empty cloud");
  double min_x = cloud.points[0].x(), max_x = min_x;
  double min_y = cloud.points[0].y(), max_y = min_y;
  for (const auto& p : cloud.points) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  LatticeSpec spec;
  spec.cell_mm = cell_mm;
  spec.origin_x_mm = min_x;
  spec.origin_y_mm = min_y;
  spec.nx = static_cast<int>(std::floor((max_x - min_x) / cell_mm)) + 1;
  spec.ny = static_cast<int>(std::floor((max_y - min_y) / cell_mm)) + 1;
  return spec;
}

DepthGrid depth_grid_from_cloud(const PointCloud& cloud,
                                const LatticeSpec& lattice) {
  DepthGrid grid;
  grid.lattice = lattice;
  std::size_t cells = static_cast<std::size_t>(lattice.nx) * lattice.ny;
  grid.z_mm.assign(cells, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> sums(cells, 0.0);
  std::vector<int> counts(cells, 0);
  for (const auto& p : cloud.points) {
    int ix = static_cast<int>(std::floor((p.x() - lattice.origin_x_mm) / lattice.cell_mm));
    int iy = static_cast<int>(std::floor((p.y() - lattice.origin_y_mm) / lattice.cell_mm));
    if (ix == lattice.nx) --ix;  // inclusive far boundary
    if (iy == lattice.ny) --iy;
    if (ix < 0 || ix >= lattice.nx || iy < 0 || iy >= lattice.ny) continue;
    std::size_t idx = static_cast<std::size_t>(iy) * lattice.nx + ix;
    sums[idx] += p.z();
    counts[idx] += 1;
  }
  for (std::size_t i = 0; i < cells; ++i)
    if (counts[i] > 0) grid.z_mm[i] = sums[i] / counts[i];
  return grid;
}

double depth_delta(const DepthGrid& frame, const DepthGrid& reference,
                   const RoiBox& roi, double min_coverage) {
  if (!frame.lattice.same_as(reference.lattice))
    fail(ErrorKind::parameter, "depth grids use different lattices");
  std::vector<double> diffs;
  diffs.reserve(frame.z_mm.size());
  int ref_valid = 0;
  for (int iy = 0; iy < reference.lattice.ny; ++iy) {
    for (int ix = 0; ix < reference.lattice.nx; ++ix) {
      if (!reference.valid(ix, iy)) continue;
      Eigen::Vector3d cell(reference.cell_center_x(ix),
                           reference.cell_center_y(iy), reference.at(ix, iy));
      if (!roi.contains(cell)) continue;
      ++ref_valid;
      if (!frame.valid(ix, iy)) continue;
      diffs.push_back(reference.at(ix, iy) - frame.at(ix, iy));
    }
  }
  if (ref_valid == 0)
    fail(ErrorKind::coverage, "reference grid has no valid cells in the roi");
  if (static_cast<double>(diffs.size()) <
      min_coverage * static_cast<double>(ref_valid))
    fail(ErrorKind::coverage,
         "grid overlap below " + std::to_string(min_coverage * 100.0) +
             "% of the reference (" + std::to_string(diffs.size()) + "/" +
             std::to_string(ref_valid) + " cells)");
  auto mid = diffs.begin() + (diffs.size() - 1) / 2;
  std::nth_element(diffs.begin(), mid, diffs.end());
  return *mid;
}

RespSeries build_series(const std::vector<double>& deltas_mm, double fs_hz) {
  if (deltas_mm.empty())
    fail(ErrorKind::parameter, "cannot build a series from zero samples");
  if (fs_hz <= 0.0) fail(ErrorKind::parameter, "fs must be positive");
  for (double d : deltas_mm)
    if (!std::isfinite(d))
      fail(ErrorKind::parameter, "series samples must be finite");
  RespSeries s;
  s.fs_hz = fs_hz;
  double mean = std::accumulate(deltas_mm.begin(), deltas_mm.end(), 0.0) /
                static_cast<double>(deltas_mm.size());
  s.depth_mm.reserve(deltas_mm.size());
  for (double d : deltas_mm) s.depth_mm.push_back(d - mean);
  return s;
}

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 transform; sign = -1 forward, +1 inverse
// (inverse is unscaled; callers divide by N).
void fft_radix2(std::vector<std::complex<double>>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = sign * 2.0 * M_PI / static_cast<double>(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// O(N^2) transform for arbitrary lengths; only used by the band-pass path
// when the series length is not a power of two.
std::vector<std::complex<double>> dft_direct(
    const std::vector<std::complex<double>>& a, int sign) {
  const std::size_t n = a.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double ang = sign * 2.0 * M_PI * static_cast<double>(k * j % n) /
                   static_cast<double>(n);
      acc += a[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<std::complex<double>> transform_exact(
    std::vector<std::complex<double>> a, int sign) {
  if (is_pow2(a.size())) {
    fft_radix2(a, sign);
    return a;
  }
  return dft_direct(a, sign);
}

}  // namespace

Spectrum fft(const RespSeries& series) {
  if (series.size() < 2)
    fail(ErrorKind::parameter, "fft needs at least 2 samples");
  Spectrum spec;
  spec.source_length = series.size();
  spec.transform_length = next_pow2(series.size());
  spec.fs_hz = series.fs_hz;
  spec.bins.assign(spec.transform_length, {0.0, 0.0});
  for (std::size_t i = 0; i < series.size(); ++i)
    spec.bins[i] = std::complex<double>(series.depth_mm[i], 0.0);
  fft_radix2(spec.bins, -1);
  return spec;
}

double spectral_peak_hz(const Spectrum& spectrum,
                        const PlausibleBand& plausible) {
  double nyquist = spectrum.fs_hz / 2.0;
  if (!(plausible.lo_hz > 0.0) || !(plausible.lo_hz < plausible.hi_hz) ||
      plausible.hi_hz > nyquist)
    fail(ErrorKind::parameter, "plausible band must lie inside (0, fs/2]");

  double overall_max = 0.0;
  for (std::size_t k = 0; k <= spectrum.transform_length / 2; ++k)
    overall_max = std::max(overall_max, spectrum.magnitude(k));

  double best_mag = -1.0;
  double best_freq = 0.0;
  for (std::size_t k = 1; k <= spectrum.transform_length / 2; ++k) {
    double f = spectrum.freq(k);
    if (f < plausible.lo_hz || f > plausible.hi_hz) continue;
    double m = spectrum.magnitude(k);
    if (m > best_mag) {
      best_mag = m;
      best_freq = f;
    }
  }
  // Nothing but numerical dust in the plausible range counts as no signal.
  if (best_mag < 0.0 || best_mag <= 1e-9 * overall_max)
    fail(ErrorKind::no_signal,
         "no spectral energy in the plausible breathing band");
  return best_freq;
}

BandSelection select_band(const Spectrum& spectrum,
                          const PlausibleBand& plausible, double margin_hz) {
  double peak = spectral_peak_hz(spectrum, plausible);
  BandSelection band;
  band.f_lo_hz = std::max(peak - margin_hz, plausible.lo_hz);
  band.f_hi_hz = std::min(peak + margin_hz, plausible.hi_hz);
  return band;
}

RespSeries bandpass(const RespSeries& series, const BandSelection& band) {
  if (!(band.f_lo_hz > 0.0) || !(band.f_lo_hz < band.f_hi_hz) ||
      band.f_hi_hz > series.fs_hz / 2.0)
    fail(ErrorKind::parameter, "band must satisfy 0 < lo < hi <= fs/2");
  const std::size_t n = series.size();
  if (n < 2) fail(ErrorKind::parameter, "bandpass needs at least 2 samples");

  std::vector<std::complex<double>> bins(n);
  for (std::size_t i = 0; i < n; ++i)
    bins[i] = std::complex<double>(series.depth_mm[i], 0.0);
  bins = transform_exact(std::move(bins), -1);

  // Zero every bin whose frequency (mirrors included) is outside the band.
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t sym = std::min(k, n - k);  // mirror pair index
    double f = static_cast<double>(sym) * series.fs_hz / static_cast<double>(n);
    if (f < band.f_lo_hz || f > band.f_hi_hz) bins[k] = {0.0, 0.0};
  }

  bins = transform_exact(std::move(bins), +1);
  double peak_in = 0.0;
  for (double v : series.depth_mm) peak_in = std::max(peak_in, std::abs(v));
  RespSeries out;
  out.fs_hz = series.fs_hz;
  out.depth_mm.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> v = bins[i] / static_cast<double>(n);
    if (std::abs(v.imag()) > 1e-9 * std::max(1.0, peak_in))
      fail(ErrorKind::validation,
           "bandpass produced a non-real sample; transform is inconsistent");
    out.depth_mm[i] = v.real();
  }
  return out;
}

std::vector<std::size_t> find_breath_peaks(const RespSeries& series,
                                           const PeakParams& params) {
  const std::vector<double>& x = series.depth_mm;
  const std::size_t n = x.size();
  std::vector<std::size_t> candidates;
  if (n < 3) return candidates;

  // Plateau-aware local maxima: a run of equal values counts as one peak
  // (center sample) when both flanks fall away.
  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i] > x[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;
      if (j + 1 < n && x[j + 1] < x[i]) candidates.push_back((i + j) / 2);
      i = j + 1;
    } else {
      ++i;
    }
  }
  if (candidates.empty()) return candidates;

  double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  double sigma = std::sqrt(var / n);
  double min_prominence = params.min_prominence_mult * sigma;

  // Prominence: drop to the highest surrounding valley, where each side
  // extends until a strictly higher sample (or the series edge).
  std::vector<std::size_t> prominent;
  for (std::size_t p : candidates) {
    double left_min = x[p];
    for (std::size_t k = p; k-- > 0;) {
      if (x[k] > x[p]) break;
      left_min = std::min(left_min, x[k]);
    }
    double right_min = x[p];
    for (std::size_t k = p + 1; k < n; ++k) {
      if (x[k] > x[p]) break;
      right_min = std::min(right_min, x[k]);
    }
    double prominence = x[p] - std::max(left_min, right_min);
    if (prominence >= min_prominence) prominent.push_back(p);
  }

  // Spacing: higher peak wins; equal heights keep the earlier one.
  std::vector<std::size_t> by_height(prominent.size());
  std::iota(by_height.begin(), by_height.end(), 0);
  std::stable_sort(by_height.begin(), by_height.end(),
                   [&](std::size_t a, std::size_t b) {
                     return x[prominent[a]] > x[prominent[b]];
                   });
  double min_gap = params.min_spacing_s * series.fs_hz;
  std::vector<char> kept(prominent.size(), 0);
  for (std::size_t rank : by_height) {
    bool blocked = false;
    for (std::size_t other = 0; other < prominent.size(); ++other) {
      if (!kept[other]) continue;
      double gap = std::abs(static_cast<double>(prominent[rank]) -
                            static_cast<double>(prominent[other]));
      if (gap < min_gap) {
        blocked = true;
        break;
      }
    }
    if (!blocked) kept[rank] = 1;
  }
  std::vector<std::size_t> result;
  for (std::size_t k = 0; k < prominent.size(); ++k)
    if (kept[k]) result.push_back(prominent[k]);
  std::sort(result.begin(), result.end());
  return result;
}

int count_breaths(const RespSeries& series, const PeakParams& params) {
  return static_cast<int>(find_breath_peaks(series, params).size());
}

const char* age_band_name(AgeBand band) {
  switch (band) {
    case AgeBand::under6: return "under6";
    case AgeBand::six_to_twelve: return "6to12";
    case AgeBand::unspecified: return "unspecified";
  }
  return "unspecified";
}

const char* classification_name(Classification c) {
  switch (c) {
    case Classification::below_range: return "below_range";
    case Classification::normal: return "normal";
    case Classification::above_range: return "above_range";
  }
  return "normal";
}

Classification classify(int breath_count, double duration_s, AgeBand age) {
  if (duration_s <= 0.0)
    fail(ErrorKind::parameter, "duration must be positive");
  double bpm = breath_count * 60.0 / duration_s;
  switch (age) {
    case AgeBand::under6:
      if (bpm < 22.0) return Classification::below_range;
      if (bpm > 34.0) return Classification::above_range;
      return Classification::normal;
    case AgeBand::six_to_twelve:
      if (bpm < 18.0) return Classification::below_range;
      if (bpm > 30.0) return Classification::above_range;
      return Classification::normal;
    case AgeBand::unspecified: {
      double per_30s = breath_count * 30.0 / duration_s;
      if (per_30s > 17.0) return Classification::above_range;
      if (per_30s < 10.0) return Classification::below_range;
      return Classification::normal;
    }
  }
  return Classification::normal;
}

double max_excursion(const RespSeries& series) {
  double best = 0.0;
  for (double v : series.depth_mm) best = std::max(best, v);
  return best;
}

BreathReport make_breath_report(const RespSeries& filtered, int breath_count,
                                AgeBand age) {
  BreathReport r;
  r.breath_count = breath_count;
  r.duration_s = filtered.duration_s();
  r.bpm = breath_count * 60.0 / r.duration_s;
  r.age_band = age;
  r.classification = classify(breath_count, r.duration_s, age);
  r.max_excursion_mm = max_excursion(filtered);
  return r;
}

}  // namespace breathscope
