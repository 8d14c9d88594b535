#include <doctest.h>

#include <cmath>

#include "breathscope/error.hpp"
#include "breathscope/synthchest.hpp"

namespace bs = breathscope;

TEST_CASE("chest_depth waveform behavior") {
  bs::ChestModel model;
  model.pattern.kind = bs::Waveform::sinusoid;
  model.pattern.amplitude_mm = 10.0;
  model.pattern.freq_hz = 0.25;
  model.relief_amplitude_mm = 0.0;  // pure analytic surface for these checks

  SUBCASE("t = 0 gives the base surface") {
    CHECK(bs::chest_depth(model, 0.0, 0.0, 0.0) ==
          doctest::Approx(model.standoff_mm - model.cap_height_mm));
    CHECK(bs::chest_depth(model, 30.0, -20.0, 0.0) ==
          doctest::Approx(model.base_depth_mm(30.0, -20.0)));
  }
  SUBCASE("center moves by the full amplitude at the sine crest") {
    double t_peak = 1.0 / (4.0 * model.pattern.freq_hz);
    CHECK(bs::chest_depth(model, 0.0, 0.0, t_peak) ==
          doctest::Approx(model.standoff_mm - model.cap_height_mm - 10.0));
  }
  SUBCASE("zero amplitude keeps the surface static") {
    model.pattern.amplitude_mm = 0.0;
    for (double t : {0.0, 0.7, 2.3, 9.9})
      CHECK(bs::chest_depth(model, 15.0, 10.0, t) ==
            doctest::Approx(bs::chest_depth(model, 15.0, 10.0, 0.0)));
  }
  SUBCASE("outside the extent returns the backdrop depth") {
    CHECK(bs::chest_depth(model, 500.0, 0.0, 0.3) ==
          doctest::Approx(model.backdrop_mm));
    model.backdrop_mm = 0.0;
    CHECK(!std::isfinite(bs::chest_depth(model, 500.0, 0.0, 0.3)));
  }
  SUBCASE("envelope is 1 on the plateau and 0 at the rim") {
    CHECK(model.envelope(0.0, 0.0) == 1.0);
    CHECK(model.envelope(0.5 * model.semi_axis_x_mm, 0.0) == 1.0);
    CHECK(model.envelope(0.999 * model.semi_axis_x_mm, 0.0) <
          1e-4);
    CHECK(model.envelope(2.0 * model.semi_axis_x_mm, 0.0) == 0.0);
  }
}

TEST_CASE("breathing patterns") {
  SUBCASE("half-rectified never goes negative") {
    bs::BreathingPattern p;
    p.kind = bs::Waveform::half_rectified;
    p.amplitude_mm = 2.5;
    p.freq_hz = 0.7;
    for (double t = 0.0; t < 10.0; t += 0.05) {
      CHECK(p.displacement_mm(t) >= 0.0);
      CHECK(p.displacement_mm(t) <= 2.5);
    }
  }
  SUBCASE("mixed halves switch regime at the boundary") {
    bs::BreathingPattern p = bs::scenario_pattern("mixed", 60.0, 1);
    CHECK(p.switch_time_s == doctest::Approx(30.0));
    // first half: 0.33 Hz sinusoid reaching +-6
    double lo = 0.0, hi = 0.0;
    for (double t = 0.0; t < 30.0; t += 0.01) {
      lo = std::min(lo, p.displacement_mm(t));
      hi = std::max(hi, p.displacement_mm(t));
    }
    CHECK(hi == doctest::Approx(6.0).epsilon(1e-3));
    CHECK(lo == doctest::Approx(-6.0).epsilon(1e-3));
    // second half: half-rectified 0.7 Hz capped at 2.5
    lo = hi = 0.0;
    for (double t = 30.0; t < 60.0; t += 0.01) {
      lo = std::min(lo, p.displacement_mm(t));
      hi = std::max(hi, p.displacement_mm(t));
    }
    CHECK(hi == doctest::Approx(2.5).epsilon(1e-3));
    CHECK(lo == 0.0);
  }
  SUBCASE("cough adds transient spikes beyond the base amplitude") {
    bs::BreathingPattern p = bs::scenario_pattern("cough", 60.0, 42);
    REQUIRE(p.cough_times_s.size() == 2);
    double at_spike = p.displacement_mm(p.cough_times_s[0]);
    CHECK(at_spike > 6.0);  // sinusoid alone cannot reach this
  }
  SUBCASE("unknown scenario rejected") {
    CHECK_THROWS_AS(bs::scenario_pattern("hiccup", 60.0, 1), bs::Error);
  }
}

TEST_CASE("render_stereo ground truth satisfies d = f*B/Z") {
  bs::ChestModel model;
  bs::StereoRig rig = bs::synthetic_rig(160, 120);
  bs::RenderResult rr = bs::render_stereo(model, rig, 160, 120, 0.4, 0.0, 5);
  double f = rig.left.fx, b = rig.baseline_mm();
  int checked = 0;
  for (std::size_t i = 0; i < rr.truth.depth_mm.size(); ++i) {
    float z = rr.truth.depth_mm[i];
    float d = rr.truth.disparity_px[i];
    if (!std::isfinite(z)) {
      CHECK(!std::isfinite(d));
      continue;
    }
    CHECK(std::abs(d - f * b / z) / d < 1e-6);
    ++checked;
  }
  CHECK(checked > 5000);
}

TEST_CASE("flat scene renders constant ground-truth disparity") {
  bs::ChestModel plane;
  plane.cap_height_mm = 0.0;
  plane.relief_amplitude_mm = 0.0;
  plane.pattern.amplitude_mm = 0.0;
  plane.backdrop_mm = plane.standoff_mm;
  bs::StereoRig rig = bs::synthetic_rig(160, 120);
  bs::RenderResult rr = bs::render_stereo(plane, rig, 160, 120, 0.0, 0.0, 5);
  double expected = rig.left.fx * rig.baseline_mm() / plane.standoff_mm;
  for (std::size_t i = 0; i < rr.truth.disparity_px.size(); ++i) {
    REQUIRE(std::isfinite(rr.truth.disparity_px[i]));
    CHECK(rr.truth.disparity_px[i] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("renderer is deterministic and noise respects the seed") {
  bs::ChestModel model;
  bs::StereoRig rig = bs::synthetic_rig(96, 72);
  bs::RenderResult a = bs::render_stereo(model, rig, 96, 72, 0.8, 2.0, 99);
  bs::RenderResult b = bs::render_stereo(model, rig, 96, 72, 0.8, 2.0, 99);
  CHECK(a.frame.left.data == b.frame.left.data);
  CHECK(a.frame.right.data == b.frame.right.data);
  bs::RenderResult c = bs::render_stereo(model, rig, 96, 72, 0.8, 2.0, 100);
  CHECK(a.frame.left.data != c.frame.left.data);
}

TEST_CASE("static noiseless scenes render identical frames over time") {
  bs::ChestModel model;
  model.pattern.amplitude_mm = 0.0;
  bs::StereoRig rig = bs::synthetic_rig(96, 72);
  bs::RenderResult t0 = bs::render_stereo(model, rig, 96, 72, 0.0, 0.0, 7);
  bs::RenderResult t1 = bs::render_stereo(model, rig, 96, 72, 1.7, 0.0, 7);
  CHECK(t0.frame.left.data == t1.frame.left.data);
  CHECK(t0.frame.right.data == t1.frame.right.data);
}

TEST_CASE("rendered pair encodes the breathing displacement as disparity") {
  // center pixel disparity must grow by f*B*(g/Z^2) when the chest approaches
  bs::ChestModel model;
  model.relief_amplitude_mm = 0.0;
  model.pattern.amplitude_mm = 10.0;
  model.pattern.freq_hz = 0.25;
  bs::StereoRig rig = bs::synthetic_rig(160, 120);
  bs::RenderResult rest = bs::render_stereo(model, rig, 160, 120, 0.0, 0.0, 5);
  bs::RenderResult peak = bs::render_stereo(model, rig, 160, 120, 1.0, 0.0, 5);
  std::size_t center = 60 * 160 + 80;
  double z0 = rest.truth.depth_mm[center];
  double z1 = peak.truth.depth_mm[center];
  CHECK(z0 - z1 == doctest::Approx(10.0).epsilon(1e-4));
  CHECK(peak.truth.disparity_px[center] > rest.truth.disparity_px[center]);
}

TEST_CASE("generate_sequence") {
  bs::ChestModel model;
  bs::StereoRig rig = bs::synthetic_rig(64, 48);
  SUBCASE("frame count and ground-truth series follow fps and duration") {
    bs::SyntheticSequence seq =
        bs::generate_sequence(model, rig, 64, 48, 30.0, 2.0, 0.0, 3);
    CHECK(seq.frames.size() == 60);
    CHECK(seq.frames.fps == 30.0);
    REQUIRE(seq.truth.t_s.size() == 60);
    for (int i = 0; i < 60; ++i) {
      double t = i / 30.0;
      CHECK(seq.truth.t_s[i] == doctest::Approx(t));
      CHECK(seq.truth.displacement_mm[i] ==
            doctest::Approx(model.pattern.displacement_mm(t)));
    }
  }
  SUBCASE("same seed reproduces the sequence bitwise") {
    bs::SyntheticSequence a =
        bs::generate_sequence(model, rig, 64, 48, 10.0, 1.0, 2.0, 77);
    bs::SyntheticSequence b =
        bs::generate_sequence(model, rig, 64, 48, 10.0, 1.0, 2.0, 77);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
      CHECK(a.frames.frames[i].left.data == b.frames.frames[i].left.data);
      CHECK(a.frames.frames[i].right.data == b.frames.frames[i].right.data);
    }
  }
  SUBCASE("nyquist violation rejected") {
    model.pattern.freq_hz = 0.7;
    CHECK_THROWS_AS(bs::generate_sequence(model, rig, 64, 48, 1.2, 5.0, 0.0, 1),
                    bs::Error);
  }
  SUBCASE("non-rectified rigs rejected") {
    bs::StereoRig bad = rig;
    bad.translation_mm = Eigen::Vector3d(-90.0, 5.0, 0.0);
    CHECK_THROWS_AS(bs::render_stereo(model, bad, 64, 48, 0.0, 0.0, 1),
                    bs::Error);
  }
}

TEST_CASE("texture field is deterministic and spans useful contrast") {
  bs::ChestModel model;
  double lo = 255.0, hi = 0.0;
  for (double y = -100.0; y <= 100.0; y += 7.0) {
    for (double x = -120.0; x <= 120.0; x += 7.0) {
      double v = model.texture(x, y);
      CHECK(v == model.texture(x, y));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  CHECK(hi - lo > 40.0);
  CHECK(lo >= 0.0);
  CHECK(hi <= 255.0);
}

TEST_CASE("noiseless pairs are row-aligned: right view matches left shifted "
          "by the true disparity") {
  bs::ChestModel model;
  bs::StereoRig rig = bs::synthetic_rig(160, 120);
  bs::RenderResult rr = bs::render_stereo(model, rig, 160, 120, 0.6, 0.0, 9);
  const bs::GrayImage& right = rr.frame.right;
  int checked = 0;
  double worst = 0.0;
  for (int v = 10; v < 110; v += 9) {
    for (int u = 30; u < 150; u += 7) {
      float d = rr.truth.disparity_px[static_cast<std::size_t>(v) * 160 + u];
      if (!std::isfinite(d)) continue;
      double ur = u - d;
      if (ur < 1.0 || ur > 158.0) continue;
      int x0 = static_cast<int>(ur);
      double fx = ur - x0;
      double sampled = (1.0 - fx) * right.at(x0, v) + fx * right.at(x0 + 1, v);
      worst = std::max(worst,
                       std::abs(sampled - rr.frame.left.at(u, v)));
      ++checked;
    }
  }
  CHECK(checked > 150);
  // bilinear sampling of a band-limited texture: small but nonzero error
  CHECK(worst < 8.0);
}

TEST_CASE("two-tone waveform sums its components") {
  bs::BreathingPattern p;
  p.kind = bs::Waveform::two_tone;
  p.amplitude_mm = 4.0;
  p.freq_hz = 0.3;
  p.second_amplitude_mm = 1.5;
  p.second_freq_hz = 0.9;
  for (double t : {0.0, 0.31, 1.7, 4.44}) {
    double expected = 4.0 * std::sin(2.0 * M_PI * 0.3 * t) +
                      1.5 * std::sin(2.0 * M_PI * 0.9 * t);
    CHECK(p.displacement_mm(t) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(p.max_freq_hz() == doctest::Approx(0.9));
}

TEST_CASE("sinusoid phase shifts the start of the cycle") {
  bs::BreathingPattern p;
  p.amplitude_mm = 5.0;
  p.freq_hz = 0.25;
  p.phase_rad = M_PI / 2.0;
  CHECK(p.displacement_mm(0.0) == doctest::Approx(5.0));  // starts at full inhale
  CHECK(p.displacement_mm(1.0) == doctest::Approx(0.0).epsilon(1e-9));
}
