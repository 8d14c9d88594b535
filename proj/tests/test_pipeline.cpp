#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "breathscope/error.hpp"
#include "breathscope/pipeline.hpp"
#include "breathscope/ply.hpp"

namespace bs = breathscope;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("bs_pipe_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("roi parsing round trip") {
  CHECK(bs::parse_roi("full").full);
  bs::RoiBox box = bs::parse_roi("-10:-20:800:10:20:1000");
  CHECK(!box.full);
  CHECK(box.min_mm.x() == -10.0);
  CHECK(box.max_mm.z() == 1000.0);
  CHECK(bs::parse_roi(bs::roi_to_string(box)).min_mm == box.min_mm);
  CHECK_THROWS_AS(bs::parse_roi("1:2:3"), bs::Error);
  CHECK_THROWS_AS(bs::parse_roi("a:b:c:d:e:f"), bs::Error);
}

TEST_CASE("config file round trip and unknown-key rejection") {
  fs::path dir = temp_dir("cfg");
  bs::PipelineConfig cfg;
  cfg.match.min_disparity = 30;
  cfg.match.max_disparity = 42;
  cfg.grid_cell_mm = 4.5;
  cfg.age_band = bs::AgeBand::six_to_twelve;
  cfg.roi = bs::parse_roi("-102:-85:829:102:85:920");
  cfg.band_auto = false;
  cfg.manual_band = {0.2, 0.5};
  cfg.save(dir / "config.txt");
  bs::PipelineConfig back = bs::PipelineConfig::from_file(dir / "config.txt");
  CHECK(back.match.min_disparity == 30);
  CHECK(back.match.max_disparity == 42);
  CHECK(back.grid_cell_mm == 4.5);
  CHECK(back.age_band == bs::AgeBand::six_to_twelve);
  CHECK(!back.roi.full);
  CHECK(back.roi.min_mm.x() == -102.0);
  CHECK(!back.band_auto);
  CHECK(back.manual_band.f_lo_hz == 0.2);

  std::ofstream(dir / "bad.txt") << "fps = 30\n";
  CHECK_THROWS_WITH_AS(bs::PipelineConfig::from_file(dir / "bad.txt"),
                       doctest::Contains("unknown config key"), bs::Error);
}

TEST_CASE("parallel_for covers every index exactly once") {
  for (int threads : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(257);
    for (auto& h : hits) h = 0;
    bs::parallel_for(hits.size(), threads,
                     [&](std::size_t i) { hits[i].fetch_add(1); });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_for propagates worker exceptions") {
  CHECK_THROWS_AS(bs::parallel_for(16, 3,
                                   [&](std::size_t i) {
                                     if (i == 7)
                                       bs::fail(bs::ErrorKind::parameter, "boom");
                                   }),
                  bs::Error);
}

TEST_CASE("resolve_thread_count honors the environment cap") {
  setenv("BREATHSCOPE_THREADS", "1", 1);
  CHECK(bs::resolve_thread_count(8) == 1);
  setenv("BREATHSCOPE_THREADS", "3", 1);
  CHECK(bs::resolve_thread_count(8) == 3);
  CHECK(bs::resolve_thread_count(2) == 2);
  unsetenv("BREATHSCOPE_THREADS");
  CHECK(bs::resolve_thread_count(5) == 5);
}

TEST_CASE("ply writer format and round trip") {
  fs::path dir = temp_dir("ply");

  SUBCASE("empty cloud writes a valid zero-vertex file") {
    bs::PointCloud empty;
    bs::write_ply(dir / "empty.ply", empty);
    std::string text = slurp(dir / "empty.ply");
    CHECK(text.find("element vertex 0") != std::string::npos);
    bs::PointCloud back = bs::read_ply(dir / "empty.ply");
    CHECK(back.size() == 0);
  }
  SUBCASE("single vertex line is exactly the coordinates") {
    bs::PointCloud one;
    one.points.emplace_back(1.5, -2.0, 1000.0);
    bs::write_ply(dir / "one.ply", one);
    std::string text = slurp(dir / "one.ply");
    CHECK(text.find("1.5 -2 1000\n") != std::string::npos);
    CHECK(text.find("property float x") != std::string::npos);
    CHECK(text.find("format ascii 1.0") != std::string::npos);
    CHECK(text.find("\r") == std::string::npos);
  }
  SUBCASE("synthetic plane round-trips within float precision") {
    bs::PointCloud plane;
    for (int i = 0; i < 200; ++i)
      plane.points.emplace_back(0.37 * i - 20.0, 0.11 * i - 9.0,
                                901.3 + 0.01 * i);
    bs::write_ply(dir / "plane.ply", plane);
    bs::PointCloud back = bs::read_ply(dir / "plane.ply");
    REQUIRE(back.size() == plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
      CHECK(back.points[i].x() ==
            doctest::Approx(plane.points[i].x()).epsilon(1e-6));
      CHECK(back.points[i].z() ==
            doctest::Approx(plane.points[i].z()).epsilon(1e-6));
    }
  }
}

TEST_CASE("pipeline closure: noiseless rendering recovers the breathing signal") {
  // Full pipeline over a small noiseless capture; the raw series must match
  // the ground-truth displacement up to a positive scale within 10% RMS.
  fs::path dir = temp_dir("closure");
  bs::ChestModel model;
  model.pattern.kind = bs::Waveform::sinusoid;
  model.pattern.amplitude_mm = 6.0;
  model.pattern.freq_hz = 0.4;
  const double fps = 8.0, duration = 12.0;
  bs::write_synthetic_dataset(model, 160, 120, fps, duration, 0.0, 21, dir);
  bs::PipelineConfig cfg = bs::PipelineConfig::from_file(dir / "config.txt");
  bs::RunReport report =
      bs::analyze_to_dir(dir, dir / "calib.txt", cfg, dir / "out");

  REQUIRE(report.raw.size() == static_cast<std::size_t>(fps * duration));
  std::vector<double> gt(report.raw.size());
  double gt_mean = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt[i] = model.pattern.displacement_mm(i / fps);
    gt_mean += gt[i];
  }
  gt_mean /= static_cast<double>(gt.size());
  double dot = 0.0, gg = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    double g = gt[i] - gt_mean;
    dot += report.raw.depth_mm[i] * g;
    gg += g * g;
  }
  double scale = dot / gg;
  CHECK(scale > 0.0);  // inhalation-positive sign convention
  double resid = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    double g = scale * (gt[i] - gt_mean);
    resid += (report.raw.depth_mm[i] - g) * (report.raw.depth_mm[i] - g);
    ref += g * g;
  }
  CHECK(std::sqrt(resid / ref) < 0.10);

  // frequency lands on the truth and output files exist
  CHECK(report.has_dominant);
  CHECK(std::abs(report.dominant_freq_hz - 0.4) < 0.05);
  CHECK(!report.mixed_bands);  // steady breathing: halves agree
  CHECK(fs::exists(dir / "out" / "series.csv"));
  CHECK(fs::exists(dir / "out" / "spectrum.csv"));
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "report.txt"));
  CHECK(fs::exists(dir / "out" / "plot.svg"));
  std::string svg = slurp(dir / "out" / "plot.svg");
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);

  // the serialized count is the peak-detector output, no reformatting drift
  auto json = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  CHECK(json["breath_count"].get<int>() ==
        bs::count_breaths(report.filtered, cfg.peaks));
  CHECK(json["breath_count"].get<int>() == report.breath.breath_count);
}

TEST_CASE("pipeline output is identical across worker counts") {
  fs::path dir = temp_dir("threads");
  bs::ChestModel model;
  model.pattern.amplitude_mm = 5.0;
  model.pattern.freq_hz = 0.5;
  bs::write_synthetic_dataset(model, 128, 96, 6.0, 6.0, 1.0, 5, dir);
  bs::StereoRig rig = bs::load_calibration(dir / "calib.txt");
  bs::SequenceManifest manifest =
      bs::SequenceManifest::parse_file(dir / "manifest.txt");
  bs::FrameSequence seq = bs::load_frame_sequence(dir, manifest);

  bs::PipelineConfig cfg = bs::PipelineConfig::from_file(dir / "config.txt");
  cfg.threads = 1;
  bs::RunReport one = bs::run_pipeline(seq, rig, cfg);
  cfg.threads = 4;
  bs::RunReport four = bs::run_pipeline(seq, rig, cfg);

  REQUIRE(one.raw.size() == four.raw.size());
  for (std::size_t i = 0; i < one.raw.size(); ++i) {
    CHECK(one.raw.depth_mm[i] == four.raw.depth_mm[i]);
    CHECK(one.filtered.depth_mm[i] == four.filtered.depth_mm[i]);
  }
  CHECK(one.breath.breath_count == four.breath.breath_count);
  CHECK(one.band.f_lo_hz == four.band.f_lo_hz);
}

TEST_CASE("analyze_to_dir fails cleanly on a missing calibration file") {
  fs::path dir = temp_dir("nocalib");
  bs::PipelineConfig cfg;
  CHECK_THROWS_WITH_AS(
      bs::analyze_to_dir(dir, dir / "calib.txt", cfg, dir / "out"),
      doctest::Contains("calib.txt"), bs::Error);
}

TEST_CASE("frame_cloud powers the ply export path") {
  fs::path dir = temp_dir("export");
  bs::ChestModel model;
  bs::write_synthetic_dataset(model, 128, 96, 4.0, 1.0, 0.0, 9, dir);
  bs::StereoRig rig = bs::load_calibration(dir / "calib.txt");
  bs::SequenceManifest manifest =
      bs::SequenceManifest::parse_file(dir / "manifest.txt");
  bs::FrameSequence seq = bs::load_frame_sequence(dir, manifest);
  bs::PipelineConfig cfg = bs::PipelineConfig::from_file(dir / "config.txt");
  bs::RectificationMaps maps = bs::compute_rectification(rig, 128, 96);
  double valid = 0.0;
  bs::PointCloud cloud = bs::frame_cloud(seq.frames[0], maps, cfg, &valid);
  CHECK(valid > 0.3);
  CHECK(cloud.size() > 1000);
  bs::write_ply(dir / "frame.ply", bs::crop_roi(cloud, cfg.roi));
  bs::PointCloud back = bs::read_ply(dir / "frame.ply");
  CHECK(back.size() > 500);
  for (const auto& p : back.points) {
    CHECK(p.z() > 700.0);
    CHECK(p.z() < 1000.0);
  }
}

TEST_CASE("auto reference re-bases a capture that starts at full inhale") {
  fs::path dir = temp_dir("autoref");
  bs::ChestModel model;
  model.pattern.kind = bs::Waveform::sinusoid;
  model.pattern.amplitude_mm = 6.0;
  model.pattern.freq_hz = 0.4;
  model.pattern.phase_rad = M_PI / 2.0;  // frame 0 is the full-inhale extreme
  bs::write_synthetic_dataset(model, 160, 120, 8.0, 12.0, 0.0, 33, dir);
  bs::PipelineConfig cfg = bs::PipelineConfig::from_file(dir / "config.txt");
  cfg.reference = bs::PipelineConfig::Reference::auto_midpoint;
  bs::RunReport report =
      bs::analyze_to_dir(dir, dir / "calib.txt", cfg, dir / "out");
  // the swing midpoint sits a quarter period after the extreme
  CHECK(report.reference_frame != 0);
  CHECK(report.has_dominant);
  CHECK(std::abs(report.dominant_freq_hz - 0.4) < 0.06);
  bool noted = false;
  for (const auto& w : report.warnings)
    if (w.find("auto reference") != std::string::npos) noted = true;
  CHECK(noted);
}

TEST_CASE("downsampling inside the pipeline halves the sample rate") {
  fs::path dir = temp_dir("downsample");
  bs::ChestModel model;
  model.pattern.amplitude_mm = 6.0;
  model.pattern.freq_hz = 0.4;
  bs::write_synthetic_dataset(model, 160, 120, 8.0, 12.0, 0.0, 13, dir);
  bs::PipelineConfig cfg = bs::PipelineConfig::from_file(dir / "config.txt");
  cfg.downsample_factor = 2;
  bs::RunReport report =
      bs::analyze_to_dir(dir, dir / "calib.txt", cfg, dir / "out");
  CHECK(report.raw.fs_hz == doctest::Approx(4.0));
  CHECK(report.raw.size() == 48);
  CHECK(std::abs(report.dominant_freq_hz - 0.4) < 0.06);
}

TEST_CASE("a ruined frame is interpolated and flagged, many abort the run") {
  fs::path dir = temp_dir("interp");
  bs::ChestModel model;
  model.pattern.amplitude_mm = 5.0;
  model.pattern.freq_hz = 0.5;
  bs::write_synthetic_dataset(model, 128, 96, 6.0, 8.0, 0.0, 3, dir);
  bs::StereoRig rig = bs::load_calibration(dir / "calib.txt");
  bs::FrameSequence seq = bs::load_frame_sequence(
      dir, bs::SequenceManifest::parse_file(dir / "manifest.txt"));
  bs::PipelineConfig cfg = bs::PipelineConfig::from_file(dir / "config.txt");

  SUBCASE("single bad frame") {
    // textureless frame: no disparities survive, the cloud comes out empty
    seq.frames[20].left = bs::GrayImage::filled(128, 96, 0);
    seq.frames[20].right = bs::GrayImage::filled(128, 96, 0);
    bs::RunReport report = bs::run_pipeline(seq, rig, cfg);
    CHECK(report.frames[20].interpolated);
    CHECK(std::isfinite(report.raw.depth_mm[20]));
    bool noted = false;
    for (const auto& w : report.warnings)
      if (w.find("frame 20") != std::string::npos) noted = true;
    CHECK(noted);
    CHECK(std::abs(report.dominant_freq_hz - 0.5) < 0.08);
  }
  SUBCASE("too many bad frames abort") {
    for (std::size_t i = 4; i < seq.size(); i += 3) {
      seq.frames[i].left = bs::GrayImage::filled(128, 96, 0);
      seq.frames[i].right = bs::GrayImage::filled(128, 96, 0);
    }
    CHECK_THROWS_AS(bs::run_pipeline(seq, rig, cfg), bs::Error);
  }
}

TEST_CASE("plausible band clamps to Nyquist under heavy downsampling") {
  fs::path dir = temp_dir("nyquist");
  bs::ChestModel model;
  model.pattern.amplitude_mm = 6.0;
  model.pattern.freq_hz = 0.4;
  bs::write_synthetic_dataset(model, 128, 96, 8.0, 8.0, 0.0, 4, dir);
  bs::StereoRig rig = bs::load_calibration(dir / "calib.txt");
  bs::FrameSequence seq = bs::load_frame_sequence(
      dir, bs::SequenceManifest::parse_file(dir / "manifest.txt"));
  bs::PipelineConfig cfg = bs::PipelineConfig::from_file(dir / "config.txt");
  cfg.downsample_factor = 4;  // 2 Hz sampling, Nyquist 1.0 < plausible 1.5
  bs::RunReport report = bs::run_pipeline(seq, rig, cfg);
  CHECK(report.raw.fs_hz == doctest::Approx(2.0));
  CHECK(report.band.f_hi_hz <= 1.0);
  bool noted = false;
  for (const auto& w : report.warnings)
    if (w.find("Nyquist") != std::string::npos) noted = true;
  CHECK(noted);
  CHECK(std::abs(report.dominant_freq_hz - 0.4) < 0.1);
}
