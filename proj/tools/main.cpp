// breathscope command line: synthesize breathing captures, analyze stereo
// sequences into a breath report, export point clouds for external tools.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "breathscope/error.hpp"
#include "breathscope/pipeline.hpp"
#include "breathscope/ply.hpp"

namespace bs = breathscope;
namespace fs = std::filesystem;

namespace {

int exit_code_for(const bs::Error& e) {
  switch (e.kind()) {
    case bs::ErrorKind::io:
    case bs::ErrorKind::config:
      return 2;  // missing or malformed input files
    default:
      return 1;
  }
}

bs::PipelineConfig load_config(const std::string& config_path,
                               const std::string& roi, const std::string& band,
                               const std::string& age,
                               const std::string& reference, int downsample,
                               int threads) {
  bs::PipelineConfig cfg;
  if (!config_path.empty())
    cfg = bs::PipelineConfig::from_file(config_path);
  if (!roi.empty()) cfg.roi = bs::parse_roi(roi);
  if (!band.empty()) bs::apply_band_option(cfg, band);
  if (!age.empty()) {
    if (age == "under6") cfg.age_band = bs::AgeBand::under6;
    else if (age == "6to12") cfg.age_band = bs::AgeBand::six_to_twelve;
    else if (age == "unspecified") cfg.age_band = bs::AgeBand::unspecified;
    else bs::fail(bs::ErrorKind::parameter, "--age must be under6|6to12|unspecified");
  }
  if (!reference.empty()) {
    if (reference == "first")
      cfg.reference = bs::PipelineConfig::Reference::first;
    else if (reference == "auto")
      cfg.reference = bs::PipelineConfig::Reference::auto_midpoint;
    else
      bs::fail(bs::ErrorKind::parameter, "--reference must be first|auto");
  }
  if (downsample > 0) cfg.downsample_factor = downsample;
  if (threads > 0) cfg.threads = threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contactless respiratory motion analysis from stereo image sequences"};
  app.require_subcommand(1);

  // analyze
  std::string in_dir, calib_path, config_path, out_dir;
  std::string roi_text, band_text, age_text, reference_text;
  int downsample = 0, threads = 0, export_frame = -1;
  auto* analyze = app.add_subcommand(
      "analyze", "Run the full pipeline and write series/spectrum/report files");
  analyze->add_option("--input", in_dir, "Directory with frames + manifest.txt")
      ->required();
  analyze->add_option("--calib", calib_path, "Calibration file")->required();
  analyze->add_option("--config", config_path, "Pipeline config file");
  analyze->add_option("--out", out_dir, "Output directory")->required();
  analyze->add_option("--fps-downsample", downsample,
                      "Keep every Nth frame (integer factor)");
  analyze->add_option("--roi", roi_text, "x0:y0:z0:x1:y1:z1 in mm, or 'full'");
  analyze->add_option("--band", band_text, "'auto' or LO:HI in Hz");
  analyze->add_option("--age", age_text, "under6|6to12|unspecified");
  analyze->add_option("--reference", reference_text, "first|auto");
  analyze->add_option("--threads", threads, "Worker threads (0 = hardware)");
  analyze->add_option("--export-ply", export_frame,
                      "Also export frame N's point cloud to out/frame_N.ply");

  // synth
  std::string scenario = "normal", synth_out;
  std::uint64_t seed = 1;
  double synth_fps = 15.0, synth_duration = 60.0, synth_noise = 2.0;
  int synth_w = 320, synth_h = 240;
  auto* synth = app.add_subcommand(
      "synth", "Render a synthetic breathing capture with ground truth");
  synth->add_option("scenario", scenario, "normal|deep|shallow|mixed|cough")
      ->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", seed, "Deterministic seed");
  synth->add_option("--fps", synth_fps, "Frame rate, Hz");
  synth->add_option("--duration", synth_duration, "Capture length, s");
  synth->add_option("--width", synth_w, "Per-view image width");
  synth->add_option("--height", synth_h, "Per-view image height");
  synth->add_option("--noise", synth_noise, "Gaussian intensity noise sigma");

  // export-ply
  std::string ply_in, ply_calib, ply_config, ply_out;
  int ply_frame = 0;
  auto* exportply = app.add_subcommand(
      "export-ply", "Write one frame's processed point cloud as ASCII PLY");
  exportply->add_option("--input", ply_in, "Directory with frames + manifest.txt")
      ->required();
  exportply->add_option("--calib", ply_calib, "Calibration file")->required();
  exportply->add_option("--config", ply_config, "Pipeline config file");
  exportply->add_option("--frame", ply_frame, "Frame index")->required();
  exportply->add_option("--out", ply_out, "Output .ply path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      bs::PipelineConfig cfg =
          load_config(config_path, roi_text, band_text, age_text,
                      reference_text, downsample, threads);
      bs::RunReport report =
          bs::analyze_to_dir(in_dir, calib_path, cfg, out_dir);
      if (export_frame >= 0) {
        bs::StereoRig rig = bs::load_calibration(calib_path);
        bs::SequenceManifest manifest =
            bs::SequenceManifest::parse_file(fs::path(in_dir) / "manifest.txt");
        bs::FrameSequence seq = bs::load_frame_sequence(in_dir, manifest);
        if (export_frame >= static_cast<int>(seq.size())) {
          std::fprintf(stderr, "frame %d out of range (sequence has %zu)\n",
                       export_frame, seq.size());
          return 3;
        }
        bs::RectificationMaps maps = bs::compute_rectification(
            rig, seq.frames[0].left.width, seq.frames[0].left.height);
        bs::PointCloud cloud =
            bs::frame_cloud(seq.frames[export_frame], maps, cfg);
        cloud = bs::crop_roi(cloud, cfg.roi);
        char name[64];
        std::snprintf(name, sizeof name, "frame_%d.ply", export_frame);
        bs::write_ply(fs::path(out_dir) / name, cloud);
      }
      std::printf("breaths: %d in %.1f s (%.1f/min), %s\n",
                  report.breath.breath_count, report.breath.duration_s,
                  report.breath.bpm,
                  bs::classification_name(report.breath.classification));
      std::printf("report written to %s\n", out_dir.c_str());
      return 0;
    }

    if (*synth) {
      bs::ChestModel model;
      model.pattern = bs::scenario_pattern(scenario, synth_duration, seed);
      bs::write_synthetic_dataset(model, synth_w, synth_h, synth_fps,
                                  synth_duration, synth_noise, seed, synth_out);
      std::printf("scenario '%s' written to %s\n", scenario.c_str(),
                  synth_out.c_str());
      return 0;
    }

    if (*exportply) {
      bs::PipelineConfig cfg;
      if (!ply_config.empty()) cfg = bs::PipelineConfig::from_file(ply_config);
      bs::StereoRig rig = bs::load_calibration(ply_calib);
      bs::SequenceManifest manifest =
          bs::SequenceManifest::parse_file(fs::path(ply_in) / "manifest.txt");
      bs::FrameSequence seq = bs::load_frame_sequence(ply_in, manifest);
      if (ply_frame < 0 || ply_frame >= static_cast<int>(seq.size())) {
        std::fprintf(stderr, "frame %d out of range (sequence has %zu)\n",
                     ply_frame, seq.size());
        return 3;
      }
      bs::RectificationMaps maps = bs::compute_rectification(
          rig, seq.frames[0].left.width, seq.frames[0].left.height);
      bs::PointCloud cloud = bs::frame_cloud(seq.frames[ply_frame], maps, cfg);
      cloud = bs::crop_roi(cloud, cfg.roi);
      bs::write_ply(ply_out, cloud);
      std::printf("%zu points written to %s\n", cloud.size(), ply_out.c_str());
      return 0;
    }
  } catch (const bs::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", bs::error_kind_name(e.kind()),
                 e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
