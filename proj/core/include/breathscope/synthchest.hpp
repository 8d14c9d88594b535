#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "breathscope/calib.hpp"
#include "breathscope/image.hpp"

namespace breathscope {

enum class Waveform {
  sinusoid,        // A * sin(2*pi*f*t)
  half_rectified,  // A * max(0, sin(2*pi*f*t)) — rapid partial breaths
  two_tone,        // sum of two sinusoids
  mixed_halves,    // first segment one pattern, second another
  cough,           // sinusoid plus transient spikes
};

struct BreathingPattern {
  Waveform kind = Waveform::sinusoid;
  double amplitude_mm = 6.0;
  double freq_hz = 0.33;
  double phase_rad = 0.0;  // sinusoid start phase; nonzero starts mid-breath
  // two_tone / mixed_halves second component
  double second_amplitude_mm = 0.0;
  double second_freq_hz = 0.0;
  bool second_half_rectified = false;
  double switch_time_s = 0.0;  // mixed_halves boundary
  // cough transients
  std::vector<double> cough_times_s;
  double cough_amplitude_mm = 8.0;
  double cough_width_s = 0.25;

  /// Chest-center displacement toward the camera at time t, millimetres.
  double displacement_mm(double t_s) const;
  double max_freq_hz() const;
};

/// Procedural breathing chest: a smooth elliptical bump at a standoff depth
/// whose surface moves toward the camera by envelope(x,y) * g(t). The
/// envelope is 1 over a central plateau and falls smoothly to 0 at the rim,
/// so most of the surface carries the full displacement. Outside the bump
/// the scene is a static textured plane (flush with the rim by default,
/// giving ICP rigid structure to anchor on) or empty background.
struct ChestModel {
  double standoff_mm = 900.0;    // depth of the bump rim
  double cap_height_mm = 40.0;   // bump height toward the camera
  double semi_axis_x_mm = 120.0;
  double semi_axis_y_mm = 100.0;
  double envelope_plateau = 0.8;  // normalized radius where falloff starts
  double backdrop_mm = 900.0;     // static plane depth; 0 disables it
  // Static geometric relief (cloth folds, anatomy): value noise added to the
  // base surface, tapered to zero at the rim. It does not move with
  // breathing, so frame-minus-reference depth deltas cancel it exactly; its
  // job is to break the smooth cap's sliding symmetry.
  double relief_amplitude_mm = 2.0;
  double relief_cell_mm = 25.0;
  BreathingPattern pattern;
  // deterministic value-noise surface texture
  std::uint64_t texture_seed = 1;
  double texture_cell_mm = 12.0;
  int texture_octaves = 4;
  double texture_contrast = 55.0;

  bool inside_extent(double x_mm, double y_mm) const;
  double base_depth_mm(double x_mm, double y_mm) const;  // z0(x, y)
  double envelope(double x_mm, double y_mm) const;
  /// Surface texture intensity at a material point, [0, 255].
  double texture(double x_mm, double y_mm) const;
};

/// Depth of the breathing surface under the model at (x, y) and time t;
/// returns the backdrop depth outside the bump extent (NaN when the model
/// has no backdrop).
double chest_depth(const ChestModel& model, double x_mm, double y_mm,
                   double t_s);

struct FrameGroundTruth {
  int width = 0;
  int height = 0;
  std::vector<float> depth_mm;      // per left pixel, NaN = background
  std::vector<float> disparity_px;  // f*B/depth, NaN = background
  double displacement_mm = 0.0;     // g(t)
};

struct RenderResult {
  StereoFrame frame;
  FrameGroundTruth truth;
};

/// Renders both views of the model at time t directly in rectified geometry
/// (the rig must be fronto-parallel with equal, distortion-free intrinsics).
/// Ground truth is emitted before intensity noise is added.
RenderResult render_stereo(const ChestModel& model, const StereoRig& rig,
                           int width, int height, double t_s,
                           double noise_sigma, std::uint64_t seed);

struct GroundTruthSeries {
  std::vector<double> t_s;
  std::vector<double> displacement_mm;
};

struct SyntheticSequence {
  FrameSequence frames;
  GroundTruthSeries truth;
};

/// Frames at t = i/fps for i in [0, fps*duration); per-frame noise seeds are
/// derived from the sequence seed, so equal seeds give identical sequences.
SyntheticSequence generate_sequence(const ChestModel& model,
                                    const StereoRig& rig, int width,
                                    int height, double fps, double duration_s,
                                    double noise_sigma, std::uint64_t seed);

/// Fronto-parallel synthesis rig scaled to the image size (f = 2.1875 * w,
/// principal point at the image center, 90 mm baseline).
StereoRig synthetic_rig(int width, int height);

/// Presets: normal (6 mm at 0.33 Hz), deep (12 mm at 0.15 Hz), shallow
/// (2.5 mm at 0.7 Hz, half-rectified), mixed (normal then shallow halves),
/// cough (normal plus 2 seeded spikes).
BreathingPattern scenario_pattern(const std::string& name, double duration_s,
                                  std::uint64_t seed);

}  // namespace breathscope
