#include "breathscope/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include "breathscope/error.hpp"
#include "breathscope/keyvalue.hpp"

namespace breathscope {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<double> split_colon_numbers(const std::string& text,
                                        std::size_t expect) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) {
    char* end = nullptr;
    double v = std::strtod(part.c_str(), &end);
    if (end == part.c_str() || *end != '\0')
      fail(ErrorKind::parameter, "bad number '" + part + "' in '" + text + "'");
    out.push_back(v);
  }
  if (out.size() != expect)
    fail(ErrorKind::parameter, "expected " + std::to_string(expect) +
                                   " colon-separated numbers in '" + text + "'");
  return out;
}

}  // namespace

RoiBox parse_roi(const std::string& text) {
  if (text == "full") return RoiBox::full_box();
  std::vector<double> v = split_colon_numbers(text, 6);
  return RoiBox::box(Eigen::Vector3d(v[0], v[1], v[2]),
                     Eigen::Vector3d(v[3], v[4], v[5]));
}

std::string roi_to_string(const RoiBox& roi) {
  if (roi.full) return "full";
  std::ostringstream ss;
  ss << fmt(roi.min_mm.x()) << ":" << fmt(roi.min_mm.y()) << ":"
     << fmt(roi.min_mm.z()) << ":" << fmt(roi.max_mm.x()) << ":"
     << fmt(roi.max_mm.y()) << ":" << fmt(roi.max_mm.z());
  return ss.str();
}

void apply_band_option(PipelineConfig& config, const std::string& text) {
  if (text == "auto") {
    config.band_auto = true;
    return;
  }
  std::vector<double> v = split_colon_numbers(text, 2);
  config.band_auto = false;
  config.manual_band = BandSelection{v[0], v[1]};
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  static const std::set<std::string> known = {
      "disparity_min", "disparity_max", "block_radius", "uniqueness_ratio",
      "lr_tol", "texture_threshold", "median_radius", "speckle_max_area",
      "speckle_tol", "z_min", "z_max", "denoise_k", "denoise_stddev_mult",
      "cloud_max_points", "icp_max_iterations", "icp_rmse_tol",
      "icp_reject_mult", "icp_min_correspondences", "icp_max_points",
      "grid_cell_mm", "roi", "downsample", "band", "plausible_lo_hz",
      "plausible_hi_hz", "band_margin_hz", "peak_prominence_mult",
      "peak_min_spacing_s", "age", "reference", "reference_window_s",
      "min_coverage_fraction", "max_failed_frame_fraction",
      "mixed_band_threshold_hz", "threads"};
  for (const std::string& k : kv.keys())
    if (!known.count(k))
      fail(ErrorKind::config, path.string() + ": unknown config key '" + k + "'");

  PipelineConfig c;
  c.match.min_disparity = static_cast<int>(kv.get_long("disparity_min", c.match.min_disparity));
  c.match.max_disparity = static_cast<int>(kv.get_long("disparity_max", c.match.max_disparity));
  c.match.block_radius = static_cast<int>(kv.get_long("block_radius", c.match.block_radius));
  c.match.uniqueness_ratio = kv.get_double("uniqueness_ratio", c.match.uniqueness_ratio);
  c.match.lr_consistency_tol_px = kv.get_double("lr_tol", c.match.lr_consistency_tol_px);
  c.match.texture_threshold = kv.get_double("texture_threshold", c.match.texture_threshold);
  c.median_radius = static_cast<int>(kv.get_long("median_radius", c.median_radius));
  c.speckle_max_area = static_cast<int>(kv.get_long("speckle_max_area", c.speckle_max_area));
  c.speckle_tol = kv.get_double("speckle_tol", c.speckle_tol);
  c.z_min_mm = kv.get_double("z_min", c.z_min_mm);
  c.z_max_mm = kv.get_double("z_max", c.z_max_mm);
  c.denoise_k = static_cast<int>(kv.get_long("denoise_k", c.denoise_k));
  c.denoise_stddev_mult = kv.get_double("denoise_stddev_mult", c.denoise_stddev_mult);
  c.cloud_max_points = static_cast<std::size_t>(kv.get_long("cloud_max_points", static_cast<long>(c.cloud_max_points)));
  c.icp.max_iterations = static_cast<int>(kv.get_long("icp_max_iterations", c.icp.max_iterations));
  c.icp.rmse_tol_mm = kv.get_double("icp_rmse_tol", c.icp.rmse_tol_mm);
  c.icp.reject_mult = kv.get_double("icp_reject_mult", c.icp.reject_mult);
  c.icp.min_correspondences = static_cast<int>(kv.get_long("icp_min_correspondences", c.icp.min_correspondences));
  c.icp_max_points = static_cast<std::size_t>(kv.get_long("icp_max_points", static_cast<long>(c.icp_max_points)));
  c.grid_cell_mm = kv.get_double("grid_cell_mm", c.grid_cell_mm);
  if (kv.has("roi")) c.roi = parse_roi(kv.require_string("roi"));
  c.downsample_factor = static_cast<int>(kv.get_long("downsample", c.downsample_factor));
  if (kv.has("band")) apply_band_option(c, kv.require_string("band"));
  c.plausible.lo_hz = kv.get_double("plausible_lo_hz", c.plausible.lo_hz);
  c.plausible.hi_hz = kv.get_double("plausible_hi_hz", c.plausible.hi_hz);
  c.band_margin_hz = kv.get_double("band_margin_hz", c.band_margin_hz);
  c.peaks.min_prominence_mult = kv.get_double("peak_prominence_mult", c.peaks.min_prominence_mult);
  c.peaks.min_spacing_s = kv.get_double("peak_min_spacing_s", c.peaks.min_spacing_s);
  if (kv.has("age")) {
    std::string a = kv.require_string("age");
    if (a == "under6") c.age_band = AgeBand::under6;
    else if (a == "6to12") c.age_band = AgeBand::six_to_twelve;
    else if (a == "unspecified") c.age_band = AgeBand::unspecified;
    else fail(ErrorKind::config, "age must be under6|6to12|unspecified");
  }
  if (kv.has("reference")) {
    std::string r = kv.require_string("reference");
    if (r == "first") c.reference = Reference::first;
    else if (r == "auto") c.reference = Reference::auto_midpoint;
    else fail(ErrorKind::config, "reference must be first|auto");
  }
  c.reference_window_s = kv.get_double("reference_window_s", c.reference_window_s);
  c.min_coverage_fraction = kv.get_double("min_coverage_fraction", c.min_coverage_fraction);
  c.max_failed_frame_fraction = kv.get_double("max_failed_frame_fraction", c.max_failed_frame_fraction);
  c.mixed_band_threshold_hz = kv.get_double("mixed_band_threshold_hz", c.mixed_band_threshold_hz);
  c.threads = static_cast<int>(kv.get_long("threads", c.threads));
  return c;
}

void PipelineConfig::save(const std::filesystem::path& path) const {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::io, "cannot write config: " + path.string());
  auto put = [&](const char* key, const std::string& value) {
    std::fprintf(fp, "%s = %s\n", key, value.c_str());
  };
  put("disparity_min", std::to_string(match.min_disparity));
  put("disparity_max", std::to_string(match.max_disparity));
  put("block_radius", std::to_string(match.block_radius));
  put("uniqueness_ratio", fmt(match.uniqueness_ratio));
  put("lr_tol", fmt(match.lr_consistency_tol_px));
  put("texture_threshold", fmt(match.texture_threshold));
  put("median_radius", std::to_string(median_radius));
  put("speckle_max_area", std::to_string(speckle_max_area));
  put("speckle_tol", fmt(speckle_tol));
  put("z_min", fmt(z_min_mm));
  put("z_max", fmt(z_max_mm));
  put("denoise_k", std::to_string(denoise_k));
  put("denoise_stddev_mult", fmt(denoise_stddev_mult));
  put("cloud_max_points", std::to_string(cloud_max_points));
  put("icp_max_iterations", std::to_string(icp.max_iterations));
  put("icp_rmse_tol", fmt(icp.rmse_tol_mm));
  put("icp_reject_mult", fmt(icp.reject_mult));
  put("icp_min_correspondences", std::to_string(icp.min_correspondences));
  put("icp_max_points", std::to_string(icp_max_points));
  put("grid_cell_mm", fmt(grid_cell_mm));
  put("roi", roi_to_string(roi));
  put("downsample", std::to_string(downsample_factor));
  put("band", band_auto ? "auto"
                        : fmt(manual_band.f_lo_hz) + ":" + fmt(manual_band.f_hi_hz));
  put("plausible_lo_hz", fmt(plausible.lo_hz));
  put("plausible_hi_hz", fmt(plausible.hi_hz));
  put("band_margin_hz", fmt(band_margin_hz));
  put("peak_prominence_mult", fmt(peaks.min_prominence_mult));
  put("peak_min_spacing_s", fmt(peaks.min_spacing_s));
  put("age", age_band_name(age_band));
  put("reference", reference == Reference::first ? "first" : "auto");
  put("reference_window_s", fmt(reference_window_s));
  put("min_coverage_fraction", fmt(min_coverage_fraction));
  put("max_failed_frame_fraction", fmt(max_failed_frame_fraction));
  put("mixed_band_threshold_hz", fmt(mixed_band_threshold_hz));
  put("threads", std::to_string(threads));
  if (std::fclose(fp) != 0) fail(ErrorKind::io, "write failed: " + path.string());
}

PointCloud frame_cloud(const StereoFrame& frame, const RectificationMaps& maps,
                       const PipelineConfig& config,
                       double* valid_pixel_fraction) {
  GrayImage left = rectify_image(frame.left, maps.left);
  GrayImage right = rectify_image(frame.right, maps.right);
  DisparityMap disp = compute_disparity(left, right, config.match);
  disp = filter_disparity(disp, config.median_radius, config.speckle_max_area,
                          config.speckle_tol);
  if (valid_pixel_fraction)
    *valid_pixel_fraction =
        static_cast<double>(disp.valid_count()) / disp.values.size();
  PointCloud cloud = reproject(disp, maps);
  cloud = remove_invalid(cloud, config.z_min_mm, config.z_max_mm);
  cloud = subsample_stride(cloud, config.cloud_max_points);
  DenoiseResult dn =
      denoise_statistical(cloud, config.denoise_k, config.denoise_stddev_mult);
  return std::move(dn.cloud);
}

namespace {

struct FrameOutcome {
  std::optional<DepthGrid> grid;
  FrameDiagnostics diag;
  std::vector<std::string> warnings;
};

}  // namespace

RunReport run_pipeline(const FrameSequence& sequence, const StereoRig& rig,
                       const PipelineConfig& config) {
  const FrameSequence* seq = &sequence;
  FrameSequence downsampled;
  if (config.downsample_factor > 1) {
    downsampled = downsample_sequence(sequence, config.downsample_factor);
    seq = &downsampled;
  }
  if (seq->frames.size() < 2)
    fail(ErrorKind::parameter, "analysis needs at least 2 frames");

  const int width = seq->frames.front().left.width;
  const int height = seq->frames.front().left.height;
  RectificationMaps maps = compute_rectification(rig, width, height);

  RunReport report;
  const std::size_t n = seq->frames.size();
  report.frames.resize(n);

  // Reference geometry: frame 0's cloud anchors both the ICP alignment and
  // the depth lattice.
  double ref_valid = 0.0;
  PointCloud ref_cloud = frame_cloud(seq->frames[0], maps, config, &ref_valid);
  if (ref_cloud.size() == 0)
    fail(ErrorKind::alignment, "reference frame produced an empty cloud");
  NeighborIndex ref_index(ref_cloud.points);
  PointCloud ref_roi = crop_roi(ref_cloud, config.roi);
  if (ref_roi.size() == 0)
    fail(ErrorKind::parameter, "roi excludes every reference-frame point");
  LatticeSpec lattice = lattice_covering(ref_roi, config.grid_cell_mm);

  std::vector<FrameOutcome> outcomes(n);
  outcomes[0].grid = depth_grid_from_cloud(ref_roi, lattice);
  outcomes[0].diag.valid_pixel_fraction = ref_valid;

  int workers = resolve_thread_count(config.threads);
  parallel_for(n - 1, workers, [&](std::size_t j) {
    std::size_t i = j + 1;
    FrameOutcome& out = outcomes[i];
    double valid = 0.0;
    PointCloud cloud = frame_cloud(seq->frames[i], maps, config, &valid);
    out.diag.valid_pixel_fraction = valid;
    try {
      PointCloud probe = subsample_stride(cloud, config.icp_max_points);
      IcpResult icp = icp_align(probe, ref_index, config.icp);
      out.diag.icp_iterations = icp.iterations;
      out.diag.icp_rmse_mm = icp.rmse_mm;
      PointCloud aligned = cloud;
      for (auto& p : aligned.points) p = icp.transform.apply(p);
      out.grid = depth_grid_from_cloud(crop_roi(aligned, config.roi), lattice);
    } catch (const Error& e) {
      out.warnings.push_back("frame " + std::to_string(i) + ": " +
                             std::string(error_kind_name(e.kind())) + " (" +
                             e.what() + "); depth sample interpolated");
    }
  });

  for (std::size_t i = 0; i < n; ++i)
    for (const std::string& w : outcomes[i].warnings)
      report.warnings.push_back(w);

  // Signal reference: frame 0, or the frame whose raw delta sits closest to
  // the midpoint of the early min/max swing.
  std::size_t ref_frame = 0;
  if (config.reference == PipelineConfig::Reference::auto_midpoint) {
    std::size_t window =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::floor(
                                     config.reference_window_s * seq->fps)));
    window = std::max<std::size_t>(window, 2);
    std::vector<std::pair<std::size_t, double>> early;
    for (std::size_t i = 0; i < window && i < n; ++i) {
      if (!outcomes[i].grid) continue;
      try {
        double d = depth_delta(*outcomes[i].grid, *outcomes[0].grid, config.roi,
                               config.min_coverage_fraction);
        early.emplace_back(i, d);
      } catch (const Error&) {
      }
    }
    if (early.size() >= 2) {
      double lo = early[0].second, hi = early[0].second;
      for (auto& [i, d] : early) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      double mid = 0.5 * (lo + hi);
      double best = std::numeric_limits<double>::infinity();
      for (auto& [i, d] : early) {
        if (std::abs(d - mid) < best) {
          best = std::abs(d - mid);
          ref_frame = i;
        }
      }
      report.warnings.push_back("auto reference selected frame " +
                                std::to_string(ref_frame));
    }
  }
  report.reference_frame = static_cast<int>(ref_frame);
  if (!outcomes[ref_frame].grid)
    fail(ErrorKind::coverage, "reference frame has no usable depth grid");
  const DepthGrid& ref_grid = *outcomes[ref_frame].grid;

  // Per-frame depth deltas; frames without coverage are filled from their
  // neighbors afterwards.
  std::vector<double> deltas(n, std::numeric_limits<double>::quiet_NaN());
  std::size_t failed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!outcomes[i].grid) {
      ++failed;
      report.frames[i] = outcomes[i].diag;
      continue;
    }
    try {
      deltas[i] = depth_delta(*outcomes[i].grid, ref_grid, config.roi,
                              config.min_coverage_fraction);
    } catch (const Error& e) {
      ++failed;
      report.warnings.push_back("frame " + std::to_string(i) + ": " + e.what() +
                                "; depth sample interpolated");
    }
    report.frames[i] = outcomes[i].diag;
  }
  if (static_cast<double>(failed) >
      config.max_failed_frame_fraction * static_cast<double>(n))
    fail(ErrorKind::coverage,
         std::to_string(failed) + " of " + std::to_string(n) +
             " frames failed coverage; aborting");

  // Linear interpolation over missing samples (ends clamp to the nearest
  // valid value).
  std::ptrdiff_t last_ok = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(deltas[i])) {
      if (last_ok >= 0 && static_cast<std::size_t>(last_ok) + 1 < i) {
        for (std::size_t k = last_ok + 1; k < i; ++k) {
          double t = static_cast<double>(k - last_ok) /
                     static_cast<double>(i - last_ok);
          deltas[k] = (1.0 - t) * deltas[last_ok] + t * deltas[i];
          report.frames[k].interpolated = true;
        }
      }
      last_ok = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (last_ok < 0) fail(ErrorKind::coverage, "no frame produced a depth delta");
  for (std::size_t i = 0; i < n; ++i) {  // leading/trailing gaps
    if (!std::isfinite(deltas[i])) {
      std::size_t k = i;
      while (k < n && !std::isfinite(deltas[k])) ++k;
      double v = (k < n) ? deltas[k] : deltas[last_ok];
      deltas[i] = v;
      report.frames[i].interpolated = true;
    }
  }

  report.raw = build_series(deltas, seq->fps);
  report.spectrum = fft(report.raw);

  // Heavy downsampling can push Nyquist below the configured band ceiling.
  PlausibleBand plausible = config.plausible;
  double nyquist = seq->fps / 2.0;
  if (plausible.hi_hz > nyquist) {
    plausible.hi_hz = nyquist;
    report.warnings.push_back(
        "plausible band ceiling clamped to Nyquist (" + fmt(nyquist) + " Hz)");
    if (plausible.lo_hz >= plausible.hi_hz)
      fail(ErrorKind::parameter,
           "sample rate too low for the plausible breathing band");
  }

  if (report.raw.duration_s() < 2.0 / config.plausible.lo_hz)
    report.warnings.push_back(
        "insufficient duration: capture shorter than two breathing periods "
        "at the plausible-band minimum (" +
        fmt(2.0 / config.plausible.lo_hz) + " s)");

  // Half-series analysis flags runs whose dominant band shifts mid-capture.
  if (report.raw.size() >= 8) {
    std::size_t half = report.raw.size() / 2;
    auto half_peak = [&](std::size_t begin, std::size_t end, bool& ok) {
      std::vector<double> part(report.raw.depth_mm.begin() + begin,
                               report.raw.depth_mm.begin() + end);
      try {
        Spectrum s = fft(build_series(part, report.raw.fs_hz));
        ok = true;
        return spectral_peak_hz(s, plausible);
      } catch (const Error&) {
        ok = false;
        return 0.0;
      }
    };
    report.half1_freq_hz = half_peak(0, half, report.has_half1);
    report.half2_freq_hz = half_peak(half, report.raw.size(), report.has_half2);
    report.mixed_bands =
        report.has_half1 && report.has_half2 &&
        std::abs(report.half1_freq_hz - report.half2_freq_hz) >
            config.mixed_band_threshold_hz;
  }

  try {
    report.dominant_freq_hz = spectral_peak_hz(report.spectrum, plausible);
    report.has_dominant = true;
  } catch (const Error& e) {
    if (config.band_auto) throw;  // nothing to select a band from
    report.warnings.push_back(std::string("no dominant frequency: ") + e.what());
  }

  if (config.band_auto) {
    if (report.mixed_bands) {
      // Widen to cover both halves so neither regime is filtered away.
      double lo = std::min(report.half1_freq_hz, report.half2_freq_hz);
      double hi = std::max(report.half1_freq_hz, report.half2_freq_hz);
      report.band.f_lo_hz = std::max(lo - config.band_margin_hz, plausible.lo_hz);
      report.band.f_hi_hz = std::min(hi + config.band_margin_hz, plausible.hi_hz);
      report.warnings.push_back(
          "mixed breathing: dominant band differs between capture halves (" +
          fmt(report.half1_freq_hz) + " Hz vs " + fmt(report.half2_freq_hz) +
          " Hz); band widened to cover both");
    } else {
      report.band =
          select_band(report.spectrum, plausible, config.band_margin_hz);
    }
  } else {
    report.band = config.manual_band;
  }

  report.filtered = bandpass(report.raw, report.band);
  report.peak_indices = find_breath_peaks(report.filtered, config.peaks);
  report.breath = make_breath_report(
      report.filtered, static_cast<int>(report.peak_indices.size()),
      config.age_band);
  return report;
}

RunReport analyze_to_dir(const std::filesystem::path& input_dir,
                         const std::filesystem::path& calib_file,
                         const PipelineConfig& config,
                         const std::filesystem::path& out_dir) {
  StereoRig rig = load_calibration(calib_file);
  SequenceManifest manifest =
      SequenceManifest::parse_file(input_dir / "manifest.txt");
  FrameSequence seq = load_frame_sequence(input_dir, manifest);
  RunReport report = run_pipeline(seq, rig, config);
  std::filesystem::create_directories(out_dir);
  write_series_csv(out_dir / "series.csv", report.raw, report.filtered);
  write_spectrum_csv(out_dir / "spectrum.csv", report.spectrum);
  write_report_json(out_dir / "report.json", report, config);
  write_report_txt(out_dir / "report.txt", report);
  write_plot_svg(out_dir / "plot.svg", report.filtered, report.peak_indices);
  return report;
}

void write_series_csv(const std::filesystem::path& path, const RespSeries& raw,
                      const RespSeries& filtered) {
  if (raw.size() != filtered.size())
    fail(ErrorKind::parameter, "raw/filtered series length mismatch");
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::io, "cannot write " + path.string());
  std::fprintf(fp, "t_s,raw_mm,filtered_mm\n");
  for (std::size_t i = 0; i < raw.size(); ++i)
    std::fprintf(fp, "%.9g,%.9g,%.9g\n", raw.t(i), raw.depth_mm[i],
                 filtered.depth_mm[i]);
  if (std::fclose(fp) != 0) fail(ErrorKind::io, "write failed: " + path.string());
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::io, "cannot write " + path.string());
  std::fprintf(fp, "freq_hz,magnitude\n");
  for (std::size_t k = 0; k <= s.transform_length / 2; ++k)
    std::fprintf(fp, "%.9g,%.9g\n", s.freq(k), s.magnitude(k));
  if (std::fclose(fp) != 0) fail(ErrorKind::io, "write failed: " + path.string());
}

void write_report_json(const std::filesystem::path& path, const RunReport& r,
                       const PipelineConfig& config) {
  nlohmann::ordered_json j;
  j["breath_count"] = r.breath.breath_count;
  j["duration_s"] = r.breath.duration_s;
  j["bpm"] = r.breath.bpm;
  j["age_band"] = age_band_name(r.breath.age_band);
  j["classification"] = classification_name(r.breath.classification);
  j["max_excursion_mm"] = r.breath.max_excursion_mm;
  if (r.has_dominant)
    j["dominant_freq_hz"] = r.dominant_freq_hz;
  else
    j["dominant_freq_hz"] = nullptr;
  j["band"] = {{"lo_hz", r.band.f_lo_hz}, {"hi_hz", r.band.f_hi_hz}};
  nlohmann::ordered_json halves;
  halves["first_hz"] = r.has_half1 ? nlohmann::ordered_json(r.half1_freq_hz)
                                   : nlohmann::ordered_json(nullptr);
  halves["second_hz"] = r.has_half2 ? nlohmann::ordered_json(r.half2_freq_hz)
                                    : nlohmann::ordered_json(nullptr);
  halves["mixed_bands"] = r.mixed_bands;
  j["halves"] = halves;
  j["reference_frame"] = r.reference_frame;
  nlohmann::ordered_json peaks = nlohmann::ordered_json::array();
  for (std::size_t p : r.peak_indices) peaks.push_back(r.filtered.t(p));
  j["peaks_t_s"] = peaks;
  double mean_valid = 0.0;
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (const FrameDiagnostics& d : r.frames) {
    mean_valid += d.valid_pixel_fraction;
    frames.push_back({{"valid_fraction", d.valid_pixel_fraction},
                      {"icp_iterations", d.icp_iterations},
                      {"icp_rmse_mm", d.icp_rmse_mm},
                      {"interpolated", d.interpolated}});
  }
  if (!r.frames.empty()) mean_valid /= static_cast<double>(r.frames.size());
  j["diagnostics"] = {{"mean_valid_pixel_fraction", mean_valid},
                      {"frames", frames}};
  j["warnings"] = r.warnings;
  nlohmann::ordered_json cfg;
  cfg["band"] = config.band_auto ? "auto"
                                 : fmt(config.manual_band.f_lo_hz) + ":" +
                                       fmt(config.manual_band.f_hi_hz);
  cfg["roi"] = roi_to_string(config.roi);
  cfg["disparity_range"] = {config.match.min_disparity, config.match.max_disparity};
  cfg["grid_cell_mm"] = config.grid_cell_mm;
  cfg["downsample"] = config.downsample_factor;
  j["config"] = cfg;

  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::io, "cannot write " + path.string());
  std::string text = j.dump(2);
  text += "\n";
  std::fwrite(text.data(), 1, text.size(), fp);
  if (std::fclose(fp) != 0) fail(ErrorKind::io, "write failed: " + path.string());
}

void write_report_txt(const std::filesystem::path& path, const RunReport& r) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::io, "cannot write " + path.string());
  std::fprintf(fp, "breathscope analysis report\n");
  std::fprintf(fp, "---------------------------\n");
  std::fprintf(fp, "breaths detected : %d over %.1f s (%.1f breaths/min)\n",
               r.breath.breath_count, r.breath.duration_s, r.breath.bpm);
  std::fprintf(fp, "age band         : %s\n", age_band_name(r.breath.age_band));
  const char* verdict = "breathing rate within the expected range";
  if (r.breath.classification == Classification::above_range)
    verdict = "breathing rate above the expected range; flagged as a possible symptom";
  else if (r.breath.classification == Classification::below_range)
    verdict = "breathing rate below the expected range; flagged as a possible symptom";
  std::fprintf(fp, "classification   : %s (%s)\n",
               classification_name(r.breath.classification), verdict);
  if (r.has_dominant)
    std::fprintf(fp, "dominant freq    : %.4f Hz\n", r.dominant_freq_hz);
  std::fprintf(fp, "pass band        : %.3f - %.3f Hz\n", r.band.f_lo_hz,
               r.band.f_hi_hz);
  std::fprintf(fp, "max excursion    : %.2f mm\n", r.breath.max_excursion_mm);
  if (r.mixed_bands)
    std::fprintf(fp,
                 "note             : dominant band changed between capture "
                 "halves (%.3f Hz / %.3f Hz)\n",
                 r.half1_freq_hz, r.half2_freq_hz);
  for (const std::string& w : r.warnings)
    std::fprintf(fp, "warning          : %s\n", w.c_str());
  std::fprintf(fp, "\nThis tool is a screening aid, not a medical device.\n");
  if (std::fclose(fp) != 0) fail(ErrorKind::io, "write failed: " + path.string());
}

void write_plot_svg(const std::filesystem::path& path,
                    const RespSeries& filtered,
                    const std::vector<std::size_t>& peaks) {
  const double w = 960.0, h = 320.0;
  const double x0 = 60.0, x1 = w - 20.0, y0 = h - 40.0, y1 = 20.0;
  double lo = 0.0, hi = 0.0;
  for (double v : filtered.depth_mm) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  double duration = filtered.duration_s();
  auto px = [&](std::size_t i) {
    return x0 + (x1 - x0) * (filtered.t(i) / duration);
  };
  auto py = [&](double v) { return y0 + (y1 - y0) * ((v - lo) / (hi - lo)); };

  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::io, "cannot write " + path.string());
  std::fprintf(fp,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 %g %g\" "
               "font-family=\"sans-serif\" font-size=\"12\">\n",
               w, h);
  std::fprintf(fp, "<rect width=\"%g\" height=\"%g\" fill=\"white\"/>\n", w, h);
  std::fprintf(fp,
               "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
               x0, y0, x1, y0);
  std::fprintf(fp,
               "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
               x0, y0, x0, y1);
  if (lo < 0.0 && hi > 0.0) {
    double zero = py(0.0);
    std::fprintf(fp,
                 "<line x1=\"%g\" y1=\"%.6g\" x2=\"%g\" y2=\"%.6g\" "
                 "stroke=\"#cccccc\" stroke-dasharray=\"4 4\"/>\n",
                 x0, zero, x1, zero);
  }
  std::fprintf(fp, "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"");
  for (std::size_t i = 0; i < filtered.size(); ++i)
    std::fprintf(fp, "%.6g,%.6g ", px(i), py(filtered.depth_mm[i]));
  std::fprintf(fp, "\"/>\n");
  for (std::size_t p : peaks)
    std::fprintf(fp,
                 "<circle cx=\"%.6g\" cy=\"%.6g\" r=\"3.5\" fill=\"none\" "
                 "stroke=\"#d62728\" stroke-width=\"1.5\"/>\n",
                 px(p), py(filtered.depth_mm[p]));
  std::fprintf(fp,
               "<text x=\"%g\" y=\"%g\">0 s</text>\n<text x=\"%g\" y=\"%g\" "
               "text-anchor=\"end\">%.6g s</text>\n",
               x0, h - 16.0, x1, h - 16.0, duration);
  std::fprintf(fp,
               "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.3g mm</text>\n"
               "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.3g mm</text>\n",
               x0 - 6.0, y1 + 4.0, hi, x0 - 6.0, y0 + 4.0, lo);
  std::fprintf(fp, "<text x=\"%g\" y=\"%g\">filtered chest depth vs time; "
                   "circles mark detected breaths</text>\n",
               x0 + 10.0, y1 + 4.0);
  std::fprintf(fp, "</svg>\n");
  if (std::fclose(fp) != 0) fail(ErrorKind::io, "write failed: " + path.string());
}

void write_calibration(const std::filesystem::path& path, const StereoRig& rig) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::io, "cannot write " + path.string());
  auto intr = [&](const PinholeIntrinsics& k, const char* s) {
    std::fprintf(fp, "fx%s = %.9g\nfy%s = %.9g\ncx%s = %.9g\ncy%s = %.9g\n"
                     "k1%s = %.9g\nk2%s = %.9g\n",
                 s, k.fx, s, k.fy, s, k.cx, s, k.cy, s, k.k1, s, k.k2);
  };
  intr(rig.left, "_l");
  intr(rig.right, "_r");
  std::fprintf(fp, "rot =");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      std::fprintf(fp, " %.12g", rig.rotation(r, c));
  std::fprintf(fp, "\ntrans = %.9g %.9g %.9g\n", rig.translation_mm.x(),
               rig.translation_mm.y(), rig.translation_mm.z());
  if (std::fclose(fp) != 0) fail(ErrorKind::io, "write failed: " + path.string());
}

void write_synthetic_dataset(const ChestModel& model, int width, int height,
                             double fps, double duration_s, double noise_sigma,
                             std::uint64_t seed,
                             const std::filesystem::path& out_dir) {
  StereoRig rig = synthetic_rig(width, height);
  std::filesystem::create_directories(out_dir);

  SyntheticSequence seq = generate_sequence(model, rig, width, height, fps,
                                            duration_s, noise_sigma, seed);

  char name[64];
  for (const StereoFrame& f : seq.frames.frames) {
    GrayImage composite = GrayImage::filled(2 * width, height, 0);
    for (int y = 0; y < height; ++y) {
      std::copy(f.left.data.begin() + static_cast<std::size_t>(y) * width,
                f.left.data.begin() + static_cast<std::size_t>(y + 1) * width,
                composite.data.begin() + static_cast<std::size_t>(y) * 2 * width);
      std::copy(f.right.data.begin() + static_cast<std::size_t>(y) * width,
                f.right.data.begin() + static_cast<std::size_t>(y + 1) * width,
                composite.data.begin() + static_cast<std::size_t>(y) * 2 * width + width);
    }
    std::snprintf(name, sizeof name, "frame_%05d.pgm", f.index);
    write_pgm(out_dir / name, composite);
  }

  {
    std::FILE* fp = std::fopen((out_dir / "manifest.txt").string().c_str(), "wb");
    if (!fp) fail(ErrorKind::io, "cannot write manifest");
    std::fprintf(fp, "fps = %.9g\nlayout = side_by_side\npattern = frame_{n}.pgm\n", fps);
    std::fclose(fp);
  }

  write_calibration(out_dir / "calib.txt", rig);

  {
    std::FILE* fp =
        std::fopen((out_dir / "ground_truth.csv").string().c_str(), "wb");
    if (!fp) fail(ErrorKind::io, "cannot write ground truth");
    std::fprintf(fp, "t_s,displacement_mm\n");
    for (std::size_t i = 0; i < seq.truth.t_s.size(); ++i)
      std::fprintf(fp, "%.9g,%.9g\n", seq.truth.t_s[i],
                   seq.truth.displacement_mm[i]);
    std::fclose(fp);
  }

  // Record the generation parameters alongside the data.
  {
    std::FILE* fp = std::fopen((out_dir / "scenario.txt").string().c_str(), "wb");
    if (!fp) fail(ErrorKind::io, "cannot write scenario record");
    std::fprintf(fp, "amplitude_mm = %.9g\nfreq_hz = %.9g\n",
                 model.pattern.amplitude_mm, model.pattern.freq_hz);
    if (model.pattern.kind == Waveform::mixed_halves ||
        model.pattern.kind == Waveform::two_tone)
      std::fprintf(fp, "second_amplitude_mm = %.9g\nsecond_freq_hz = %.9g\n",
                   model.pattern.second_amplitude_mm,
                   model.pattern.second_freq_hz);
    std::fprintf(fp, "standoff_mm = %.9g\nbackdrop_mm = %.9g\n",
                 model.standoff_mm, model.backdrop_mm);
    std::fprintf(fp, "fps = %.9g\nduration_s = %.9g\nnoise_sigma = %.9g\n",
                 fps, duration_s, noise_sigma);
    std::fprintf(fp, "seed = %llu\n",
                 static_cast<unsigned long long>(seed));
    std::fclose(fp);
  }

  // Analysis config tuned to the rendered geometry: disparity window around
  // the scene depths, roi tight on the envelope plateau so the static
  // surround keeps ICP rigid but stays out of the depth statistic.
  PipelineConfig cfg;
  double f = rig.left.fx;
  double b = rig.baseline_mm();
  double g_max = 0.0;
  for (double t = 0.0; t < duration_s; t += 1.0 / (8.0 * std::max(0.1, model.pattern.max_freq_hz())))
    g_max = std::max(g_max, model.pattern.displacement_mm(t));
  double z_near = model.standoff_mm - model.cap_height_mm - g_max - 5.0;
  double z_far = model.backdrop_mm > 0.0 ? model.backdrop_mm : model.standoff_mm;
  cfg.match.min_disparity =
      std::max(0, static_cast<int>(std::floor(f * b / (z_far + 20.0))) - 4);
  cfg.match.max_disparity = static_cast<int>(std::ceil(f * b / z_near)) + 4;
  double roi_x = 0.85 * model.semi_axis_x_mm;
  double roi_y = 0.85 * model.semi_axis_y_mm;
  cfg.roi = RoiBox::box(Eigen::Vector3d(-roi_x, -roi_y, z_near - 20.0),
                        Eigen::Vector3d(roi_x, roi_y, model.standoff_mm + 20.0));
  cfg.save(out_dir / "config.txt");
}

}  // namespace breathscope
