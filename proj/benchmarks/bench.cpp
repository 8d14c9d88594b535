#include <benchmark/benchmark.h>

#include "breathscope/cloud.hpp"
#include "breathscope/icp.hpp"
#include "breathscope/respsignal.hpp"
#include "breathscope/stereo.hpp"
#include "breathscope/synthchest.hpp"

namespace bs = breathscope;

namespace {

bs::RenderResult render_test_frame(int w, int h) {
  bs::ChestModel model;
  bs::StereoRig rig = bs::synthetic_rig(w, h);
  return bs::render_stereo(model, rig, w, h, 0.8, 2.0, 7);
}

void BM_RenderStereo(benchmark::State& state) {
  int w = static_cast<int>(state.range(0));
  int h = w * 3 / 4;
  for (auto _ : state) {
    auto rr = render_test_frame(w, h);
    benchmark::DoNotOptimize(rr.frame.left.data.data());
  }
}
BENCHMARK(BM_RenderStereo)->Arg(160)->Arg(320);

void BM_BlockMatch(benchmark::State& state) {
  int w = static_cast<int>(state.range(0));
  int h = w * 3 / 4;
  auto rr = render_test_frame(w, h);
  bs::MatchParams params;
  params.min_disparity = 40;
  params.max_disparity = 96;
  for (auto _ : state) {
    auto disp = bs::compute_disparity(rr.frame.left, rr.frame.right, params);
    benchmark::DoNotOptimize(disp.values.data());
  }
}
BENCHMARK(BM_BlockMatch)->Arg(160)->Arg(320);

void BM_KdTreeQuery(benchmark::State& state) {
  auto rr = render_test_frame(320, 240);
  bs::MatchParams params;
  params.min_disparity = 40;
  params.max_disparity = 96;
  auto disp = bs::compute_disparity(rr.frame.left, rr.frame.right, params);
  bs::StereoRig rig = bs::synthetic_rig(320, 240);
  auto maps = bs::compute_rectification(rig, 320, 240);
  bs::PointCloud cloud = bs::reproject(disp, maps);
  bs::NeighborIndex index(cloud.points);
  std::size_t i = 0;
  for (auto _ : state) {
    auto hit = index.nearest(cloud.points[i % cloud.size()] +
                             Eigen::Vector3d(0.3, -0.2, 0.7));
    benchmark::DoNotOptimize(hit);
    ++i;
  }
}
BENCHMARK(BM_KdTreeQuery);

void BM_IcpAlign(benchmark::State& state) {
  auto rr = render_test_frame(320, 240);
  bs::MatchParams params;
  params.min_disparity = 40;
  params.max_disparity = 96;
  auto disp = bs::compute_disparity(rr.frame.left, rr.frame.right, params);
  bs::StereoRig rig = bs::synthetic_rig(320, 240);
  auto maps = bs::compute_rectification(rig, 320, 240);
  bs::PointCloud cloud = bs::reproject(disp, maps);
  bs::PointCloud probe = bs::subsample_stride(cloud, 8000);
  bs::NeighborIndex index(cloud.points);
  for (auto _ : state) {
    auto result = bs::icp_align(probe, index);
    benchmark::DoNotOptimize(result.rmse_mm);
  }
}
BENCHMARK(BM_IcpAlign);

void BM_Fft(benchmark::State& state) {
  bs::RespSeries series;
  series.fs_hz = 15.0;
  std::size_t n = static_cast<std::size_t>(state.range(0));
  series.depth_mm.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    series.depth_mm[i] = std::sin(2.0 * M_PI * 0.3 * i / 15.0);
  for (auto _ : state) {
    auto spec = bs::fft(series);
    benchmark::DoNotOptimize(spec.bins.data());
  }
}
BENCHMARK(BM_Fft)->Arg(900)->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
