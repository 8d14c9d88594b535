#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "breathscope/calib.hpp"
#include "breathscope/parallel.hpp"
#include "breathscope/cloud.hpp"
#include "breathscope/frame_io.hpp"
#include "breathscope/icp.hpp"
#include "breathscope/respsignal.hpp"
#include "breathscope/stereo.hpp"
#include "breathscope/synthchest.hpp"

namespace breathscope {

/// Every tunable of the analysis chain. Loadable from a `key = value` file;
/// unknown keys are rejected.
struct PipelineConfig {
  MatchParams match;
  int median_radius = 2;
  int speckle_max_area = 150;
  double speckle_tol = 1.0;
  double z_min_mm = 300.0;
  double z_max_mm = 2000.0;
  int denoise_k = 16;
  double denoise_stddev_mult = 1.5;
  std::size_t cloud_max_points = 50000;
  IcpParams icp;
  std::size_t icp_max_points = 8000;
  double grid_cell_mm = 6.0;
  RoiBox roi;
  int downsample_factor = 1;
  bool band_auto = true;
  BandSelection manual_band;
  PlausibleBand plausible;
  double band_margin_hz = 0.1;
  PeakParams peaks;
  AgeBand age_band = AgeBand::unspecified;
  enum class Reference { first, auto_midpoint } reference = Reference::first;
  double reference_window_s = 10.0;
  double min_coverage_fraction = 0.25;
  double max_failed_frame_fraction = 0.2;
  double mixed_band_threshold_hz = 0.1;
  int threads = 0;  // 0 = hardware concurrency; BREATHSCOPE_THREADS caps it

  static PipelineConfig from_file(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// "x0:y0:z0:x1:y1:z1" in mm, or "full".
RoiBox parse_roi(const std::string& text);
std::string roi_to_string(const RoiBox& roi);
/// "auto" or "LO:HI" in Hz.
void apply_band_option(PipelineConfig& config, const std::string& text);

struct FrameDiagnostics {
  double valid_pixel_fraction = 0.0;
  int icp_iterations = 0;
  double icp_rmse_mm = 0.0;
  bool interpolated = false;  // delta reconstructed from neighbor frames
};

struct RunReport {
  BreathReport breath;
  bool has_dominant = false;
  double dominant_freq_hz = 0.0;
  BandSelection band;
  bool has_half1 = false, has_half2 = false;
  double half1_freq_hz = 0.0, half2_freq_hz = 0.0;
  bool mixed_bands = false;  // halves show distinct dominant bands
  int reference_frame = 0;
  std::vector<FrameDiagnostics> frames;
  std::vector<std::string> warnings;
  RespSeries raw;
  RespSeries filtered;
  Spectrum spectrum;
  std::vector<std::size_t> peak_indices;
};

/// One frame through rectify -> disparity -> filter -> reproject ->
/// z-gate -> decimate -> denoise. Shared by the analysis run and the PLY
/// export.
PointCloud frame_cloud(const StereoFrame& frame, const RectificationMaps& maps,
                       const PipelineConfig& config,
                       double* valid_pixel_fraction = nullptr);

/// Full analysis over an in-memory sequence.
RunReport run_pipeline(const FrameSequence& sequence, const StereoRig& rig,
                       const PipelineConfig& config);

/// Loads `manifest.txt` + frames from input_dir, runs the pipeline and writes
/// series.csv, spectrum.csv, report.json, report.txt and plot.svg to out_dir.
RunReport analyze_to_dir(const std::filesystem::path& input_dir,
                         const std::filesystem::path& calib_file,
                         const PipelineConfig& config,
                         const std::filesystem::path& out_dir);

void write_series_csv(const std::filesystem::path& path, const RespSeries& raw,
                      const RespSeries& filtered);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s);
void write_report_json(const std::filesystem::path& path, const RunReport& r,
                       const PipelineConfig& config);
void write_report_txt(const std::filesystem::path& path, const RunReport& r);
void write_plot_svg(const std::filesystem::path& path, const RespSeries& filtered,
                    const std::vector<std::size_t>& peaks);
void write_calibration(const std::filesystem::path& path, const StereoRig& rig);

/// Renders a scenario to disk: side-by-side PGM frames, manifest.txt,
/// calib.txt, ground_truth.csv (t_s, displacement_mm), scenario.txt and a
/// tuned config.txt for analyzing the dataset.
void write_synthetic_dataset(const ChestModel& model, int width, int height,
                             double fps, double duration_s, double noise_sigma,
                             std::uint64_t seed,
                             const std::filesystem::path& out_dir);

}  // namespace breathscope
