#include "breathscope/synthchest.hpp"

#include <algorithm>
#include <cmath>

#include "breathscope/error.hpp"
#include "breathscope/parallel.hpp"

namespace breathscope {

namespace {

// splitmix64: deterministic across platforms, unlike <random> distributions.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;  // [0, 1)
}

struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  double next_unit() {
    state = mix64(state);
    return to_unit(state);
  }
  double next_gaussian() {
    // Box-Muller; both draws come from the same stream.
    double u1 = std::max(next_unit(), 1e-300);
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(ix) * 0x8da6b343ULL) ^
                          mix64(static_cast<std::uint64_t>(iy) * 0xd8163841ULL));
  return to_unit(h);
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(double x, double y, std::uint64_t seed) {
  double fx = std::floor(x), fy = std::floor(y);
  std::int64_t ix = static_cast<std::int64_t>(fx);
  std::int64_t iy = static_cast<std::int64_t>(fy);
  double tx = smoothstep(x - fx);
  double ty = smoothstep(y - fy);
  double v00 = lattice_value(ix, iy, seed);
  double v10 = lattice_value(ix + 1, iy, seed);
  double v01 = lattice_value(ix, iy + 1, seed);
  double v11 = lattice_value(ix + 1, iy + 1, seed);
  return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) +
         ty * ((1.0 - tx) * v01 + tx * v11);
}

}  // namespace

double BreathingPattern::displacement_mm(double t_s) const {
  auto sine = [](double a, double f, double t) {
    return a * std::sin(2.0 * M_PI * f * t);
  };
  auto half = [](double a, double f, double t) {
    return a * std::max(0.0, std::sin(2.0 * M_PI * f * t));
  };
  switch (kind) {
    case Waveform::sinusoid:
      return amplitude_mm * std::sin(2.0 * M_PI * freq_hz * t_s + phase_rad);
    case Waveform::half_rectified:
      return half(amplitude_mm, freq_hz, t_s);
    case Waveform::two_tone:
      return sine(amplitude_mm, freq_hz, t_s) +
             sine(second_amplitude_mm, second_freq_hz, t_s);
    case Waveform::mixed_halves: {
      if (t_s < switch_time_s) return sine(amplitude_mm, freq_hz, t_s);
      double local = t_s - switch_time_s;
      return second_half_rectified
                 ? half(second_amplitude_mm, second_freq_hz, local)
                 : sine(second_amplitude_mm, second_freq_hz, local);
    }
    case Waveform::cough: {
      double v = sine(amplitude_mm, freq_hz, t_s);
      for (double tc : cough_times_s) {
        double u = (t_s - tc) / cough_width_s;
        v += cough_amplitude_mm * std::exp(-u * u);
      }
      return v;
    }
  }
  return 0.0;
}

double BreathingPattern::max_freq_hz() const {
  double f = freq_hz;
  if (kind == Waveform::two_tone || kind == Waveform::mixed_halves)
    f = std::max(f, second_freq_hz);
  if (kind == Waveform::cough)
    f = std::max(f, 1.0 / (2.0 * M_PI * cough_width_s));
  return f;
}

bool ChestModel::inside_extent(double x_mm, double y_mm) const {
  double nx = x_mm / semi_axis_x_mm;
  double ny = y_mm / semi_axis_y_mm;
  return nx * nx + ny * ny < 1.0;
}

double ChestModel::base_depth_mm(double x_mm, double y_mm) const {
  double nx = x_mm / semi_axis_x_mm;
  double ny = y_mm / semi_axis_y_mm;
  double rho2 = nx * nx + ny * ny;
  if (rho2 >= 1.0) return standoff_mm;
  // (1 - rho^2)^{3/2} keeps the rim slope finite, which the ray intersector
  // relies on.
  double z = standoff_mm - cap_height_mm * std::pow(1.0 - rho2, 1.5);
  if (relief_amplitude_mm > 0.0) {
    double wrinkle = 2.0 * value_noise(x_mm / relief_cell_mm,
                                       y_mm / relief_cell_mm,
                                       texture_seed ^ 0x3e11efULL) -
                     1.0;
    z += relief_amplitude_mm * wrinkle * (1.0 - rho2);  // tapers to the rim
  }
  return z;
}

double ChestModel::envelope(double x_mm, double y_mm) const {
  double nx = x_mm / semi_axis_x_mm;
  double ny = y_mm / semi_axis_y_mm;
  double rho = std::sqrt(nx * nx + ny * ny);
  if (rho >= 1.0) return 0.0;
  if (rho <= envelope_plateau) return 1.0;
  double s = (rho - envelope_plateau) / (1.0 - envelope_plateau);
  double c = std::cos(0.5 * M_PI * s);
  return c * c;
}

double ChestModel::texture(double x_mm, double y_mm) const {
  double amp = 1.0, total = 0.0, norm = 0.0;
  double scale = 1.0 / texture_cell_mm;
  for (int o = 0; o < texture_octaves; ++o) {
    total += amp * value_noise(x_mm * scale, y_mm * scale,
                               texture_seed + 0x51ED270B * o);
    norm += amp;
    amp *= 0.5;
    scale *= 2.0;
  }
  double centered = total / norm - 0.5;
  return std::clamp(128.0 + 2.0 * texture_contrast * centered, 0.0, 255.0);
}

double chest_depth(const ChestModel& model, double x_mm, double y_mm,
                   double t_s) {
  if (!model.inside_extent(x_mm, y_mm)) {
    return model.backdrop_mm > 0.0
               ? model.backdrop_mm
               : std::numeric_limits<double>::quiet_NaN();
  }
  double g = model.pattern.displacement_mm(t_s);
  return model.base_depth_mm(x_mm, y_mm) - model.envelope(x_mm, y_mm) * g;
}

namespace {

void require_rectified(const StereoRig& rig) {
  bool identity =
      (rig.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9;
  bool horizontal = std::abs(rig.translation_mm.y()) < 1e-9 &&
                    std::abs(rig.translation_mm.z()) < 1e-9 &&
                    rig.translation_mm.x() < 0.0;
  bool equal = rig.left.fx == rig.right.fx && rig.left.fy == rig.right.fy &&
               rig.left.cx == rig.right.cx && rig.left.cy == rig.right.cy &&
               rig.left.k1 == 0.0 && rig.left.k2 == 0.0 &&
               rig.right.k1 == 0.0 && rig.right.k2 == 0.0 &&
               rig.left.fx == rig.left.fy;
  if (!identity || !horizontal || !equal)
    fail(ErrorKind::parameter,
         "synthetic rendering requires a fronto-parallel rectified rig");
}

// Intersects the viewing ray (origin_x + a*z, b*z, z) with the breathing
// heightfield by fixed-point iteration on z. The surface slope times the ray
// slope stays well below 1 for the supported models, so iteration contracts.
// Returns NaN when it fails to settle (grazing rays at the bump rim).
double intersect_ray(const ChestModel& model, double origin_x, double a,
                     double b, double t_s, double z_tol = 1e-4) {
  double z = model.standoff_mm;
  for (int i = 0; i < 80; ++i) {
    double x = origin_x + a * z;
    double y = b * z;
    double zs = chest_depth(model, x, y, t_s);
    if (!std::isfinite(zs)) return std::numeric_limits<double>::quiet_NaN();
    if (std::abs(zs - z) < z_tol) return zs;
    z = zs;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

RenderResult render_stereo(const ChestModel& model, const StereoRig& rig,
                           int width, int height, double t_s,
                           double noise_sigma, std::uint64_t seed) {
  require_rectified(rig);
  const double f = rig.left.fx;
  const double cx = rig.left.cx;
  const double cy = rig.left.cy;
  const double baseline = rig.baseline_mm();

  RenderResult rr;
  rr.frame.left = GrayImage::filled(width, height, 0);
  rr.frame.right = GrayImage::filled(width, height, 0);
  rr.truth.width = width;
  rr.truth.height = height;
  rr.truth.depth_mm.assign(static_cast<std::size_t>(width) * height,
                           std::numeric_limits<float>::quiet_NaN());
  rr.truth.disparity_px.assign(static_cast<std::size_t>(width) * height,
                               std::numeric_limits<float>::quiet_NaN());
  rr.truth.displacement_mm = model.pattern.displacement_mm(t_s);

  std::vector<double> clean_left(static_cast<std::size_t>(width) * height, 0.0);
  std::vector<double> clean_right(clean_left);

  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      std::size_t idx = static_cast<std::size_t>(v) * width + u;
      double a = (u - cx) / f;
      double b = (v - cy) / f;
      // left view: camera at the origin
      double z = intersect_ray(model, 0.0, a, b, t_s);
      if (std::isfinite(z)) {
        double x = a * z, y = b * z;
        clean_left[idx] = model.texture(x, y);
        rr.truth.depth_mm[idx] = static_cast<float>(z);
        rr.truth.disparity_px[idx] = static_cast<float>(f * baseline / z);
      }
      // right view: camera sits baseline to the +x of the left camera
      double zr = intersect_ray(model, baseline, a, b, t_s);
      if (std::isfinite(zr))
        clean_right[idx] = model.texture(baseline + a * zr, b * zr);
    }
  }

  Rng noise(mix64(seed ^ 0xC0FFEEULL));
  auto emit = [&](const std::vector<double>& clean, GrayImage& out) {
    for (std::size_t i = 0; i < clean.size(); ++i) {
      double v = clean[i];
      if (noise_sigma > 0.0) v += noise_sigma * noise.next_gaussian();
      out.data[i] = static_cast<std::uint8_t>(
          std::clamp(std::lround(v), 0L, 255L));
    }
  };
  emit(clean_left, rr.frame.left);
  emit(clean_right, rr.frame.right);
  return rr;
}

namespace {

void render_frames_parallel(int count, const std::function<void(int)>& body) {
  parallel_for(static_cast<std::size_t>(count), resolve_thread_count(0),
               [&](std::size_t i) { body(static_cast<int>(i)); });
}

}  // namespace

SyntheticSequence generate_sequence(const ChestModel& model,
                                    const StereoRig& rig, int width,
                                    int height, double fps, double duration_s,
                                    double noise_sigma, std::uint64_t seed) {
  if (fps <= 2.0 * model.pattern.max_freq_hz())
    fail(ErrorKind::parameter,
         "sampling rate violates Nyquist for the breathing frequency");
  if (duration_s <= 0.0)
    fail(ErrorKind::parameter, "duration must be positive");
  int frame_count = static_cast<int>(std::floor(fps * duration_s + 1e-9));
  SyntheticSequence out;
  out.frames.fps = fps;
  out.frames.frames.resize(frame_count);
  out.truth.t_s.resize(frame_count);
  out.truth.displacement_mm.resize(frame_count);
  // Frames render independently; per-frame seeds keep the result identical
  // for any worker count.
  render_frames_parallel(frame_count, [&](int i) {
    double t = i / fps;
    RenderResult rr = render_stereo(model, rig, width, height, t, noise_sigma,
                                    seed ^ mix64(static_cast<std::uint64_t>(i) + 1));
    rr.frame.index = i;
    rr.frame.timestamp_s = t;
    out.frames.frames[i] = std::move(rr.frame);
    out.truth.t_s[i] = t;
    out.truth.displacement_mm[i] = rr.truth.displacement_mm;
  });
  return out;
}

StereoRig synthetic_rig(int width, int height) {
  StereoRig rig;
  double f = 2.1875 * width;
  rig.left.fx = rig.left.fy = f;
  rig.left.cx = width / 2.0;
  rig.left.cy = height / 2.0;
  rig.right = rig.left;
  rig.rotation = Eigen::Matrix3d::Identity();
  rig.translation_mm = Eigen::Vector3d(-90.0, 0.0, 0.0);
  return rig;
}

BreathingPattern scenario_pattern(const std::string& name, double duration_s,
                                  std::uint64_t seed) {
  BreathingPattern p;
  if (name == "normal") {
    p.kind = Waveform::sinusoid;
    p.amplitude_mm = 6.0;
    p.freq_hz = 0.33;
  } else if (name == "deep") {
    p.kind = Waveform::sinusoid;
    p.amplitude_mm = 12.0;
    p.freq_hz = 0.15;
  } else if (name == "shallow") {
    p.kind = Waveform::half_rectified;
    p.amplitude_mm = 2.5;
    p.freq_hz = 0.7;
  } else if (name == "mixed") {
    p.kind = Waveform::mixed_halves;
    p.amplitude_mm = 6.0;
    p.freq_hz = 0.33;
    p.second_amplitude_mm = 2.5;
    p.second_freq_hz = 0.7;
    p.second_half_rectified = true;
    p.switch_time_s = duration_s / 2.0;
  } else if (name == "cough") {
    p.kind = Waveform::cough;
    p.amplitude_mm = 6.0;
    p.freq_hz = 0.33;
    p.cough_amplitude_mm = 8.0;
    p.cough_width_s = 0.25;
    Rng rng(mix64(seed ^ 0x5EEDULL));
    double t1 = (0.2 + 0.25 * rng.next_unit()) * duration_s;
    double t2 = (0.55 + 0.25 * rng.next_unit()) * duration_s;
    p.cough_times_s = {t1, t2};
  } else {
    fail(ErrorKind::parameter,
         "unknown scenario '" + name +
             "' (expected normal|deep|shallow|mixed|cough)");
  }
  return p;
}

}  // namespace breathscope
