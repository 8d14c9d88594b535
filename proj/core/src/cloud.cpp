#include "breathscope/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "breathscope/error.hpp"

namespace breathscope {

RoiBox RoiBox::box(const Eigen::Vector3d& min_mm, const Eigen::Vector3d& max_mm) {
  if (!(min_mm.x() < max_mm.x() && min_mm.y() < max_mm.y() &&
        min_mm.z() < max_mm.z()))
    fail(ErrorKind::parameter, "roi box min must be below max componentwise");
  RoiBox r;
  r.full = false;
  r.min_mm = min_mm;
  r.max_mm = max_mm;
  return r;
}

NeighborIndex::NeighborIndex(std::vector<Eigen::Vector3d> points)
    : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(points_.size() / 8 + 8);
    root_ = build(0, static_cast<int>(points_.size()));
  }
}

int NeighborIndex::build(int begin, int end) {
  constexpr int kLeafSize = 16;
  int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) return id;

  // Split on the axis with the largest extent.
  Eigen::Vector3d lo = points_[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  Eigen::Vector3d extent = hi - lo;
  int axis = 0;
  if (extent.y() > extent.x()) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;
  if (extent[axis] <= 0.0) return id;  // all points coincide: keep as leaf

  int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]][axis];
  int left = build(begin, mid);
  int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

template <typename Visit>
void NeighborIndex::search(int node, const Eigen::Vector3d& q, double& worst,
                           Visit&& visit) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      int idx = order_[i];
      double d2 = (points_[idx] - q).squaredNorm();
      if (d2 < worst) visit(idx, d2);
    }
    return;
  }
  double delta = q[n.axis] - n.split;
  int near = delta < 0.0 ? n.left : n.right;
  int far = delta < 0.0 ? n.right : n.left;
  search(near, q, worst, visit);
  if (delta * delta < worst) search(far, q, worst, visit);
}

NeighborIndex::Hit NeighborIndex::nearest(const Eigen::Vector3d& query) const {
  Hit best;
  if (points_.empty()) return best;
  double worst = std::numeric_limits<double>::infinity();
  search(root_, query, worst, [&](int idx, double d2) {
    best.index = idx;
    best.dist_sq = d2;
    worst = d2;
  });
  return best;
}

std::vector<NeighborIndex::Hit> NeighborIndex::knn(const Eigen::Vector3d& query,
                                                   int k) const {
  std::vector<Hit> heap;  // max-heap on dist_sq
  if (points_.empty() || k < 1) return heap;
  heap.reserve(k + 1);
  auto cmp = [](const Hit& a, const Hit& b) { return a.dist_sq < b.dist_sq; };
  double worst = std::numeric_limits<double>::infinity();
  search(root_, query, worst, [&](int idx, double d2) {
    heap.push_back(Hit{idx, d2});
    std::push_heap(heap.begin(), heap.end(), cmp);
    if (static_cast<int>(heap.size()) > k) {
      std::pop_heap(heap.begin(), heap.end(), cmp);
      heap.pop_back();
    }
    if (static_cast<int>(heap.size()) == k) worst = heap.front().dist_sq;
  });
  std::sort_heap(heap.begin(), heap.end(), cmp);
  return heap;
}

PointCloud reproject(const DisparityMap& map, const RectificationMaps& rect) {
  PointCloud cloud;
  const double f = rect.rectified_f;
  const double b = rect.rectified_baseline_mm;
  const double cx = rect.rectified_cx;
  const double cy = rect.rectified_cy;
  cloud.points.reserve(map.valid_count());
  cloud.source_pixels.reserve(map.valid_count());
  for (int v = 0; v < map.height; ++v) {
    for (int u = 0; u < map.width; ++u) {
      float d = map.at(u, v);
      if (!std::isfinite(d) || d <= 0.0f) continue;
      double z = f * b / d;
      cloud.points.emplace_back((u - cx) * z / f, (v - cy) * z / f, z);
      cloud.source_pixels.push_back({u, v});
    }
  }
  return cloud;
}

namespace {

PointCloud filter_points(const PointCloud& cloud,
                         const std::vector<char>& keep) {
  PointCloud out;
  out.points.reserve(cloud.size());
  bool pixels = cloud.has_pixels();
  if (pixels) out.source_pixels.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!keep[i]) continue;
    out.points.push_back(cloud.points[i]);
    if (pixels) out.source_pixels.push_back(cloud.source_pixels[i]);
  }
  return out;
}

}  // namespace

PointCloud remove_invalid(const PointCloud& cloud, double z_min_mm,
                          double z_max_mm) {
  std::vector<char> keep(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    keep[i] = p.allFinite() && p.z() >= z_min_mm && p.z() <= z_max_mm;
  }
  return filter_points(cloud, keep);
}

DenoiseResult denoise_statistical(const PointCloud& cloud, int k,
                                  double stddev_mult) {
  DenoiseResult result;
  if (k < 1) fail(ErrorKind::parameter, "denoise k must be at least 1");
  if (cloud.size() <= static_cast<std::size_t>(k)) {
    result.cloud = cloud;
    result.too_few_points = true;
    return result;
  }
  NeighborIndex index(cloud.points);
  std::size_t n = cloud.size();
  std::vector<double> mean_dist(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto hits = index.knn(cloud.points[i], k + 1);
    double total = 0.0;
    int counted = 0;
    for (const auto& h : hits) {
      if (h.index == static_cast<int>(i)) continue;  // skip self
      total += std::sqrt(h.dist_sq);
      if (++counted == k) break;
    }
    mean_dist[i] = total / counted;
  }
  double mu = std::accumulate(mean_dist.begin(), mean_dist.end(), 0.0) / n;
  double var = 0.0;
  for (double d : mean_dist) var += (d - mu) * (d - mu);
  double sigma = std::sqrt(var / n);
  double cutoff = mu + stddev_mult * sigma;
  std::vector<char> keep(n, 0);
  for (std::size_t i = 0; i < n; ++i) keep[i] = mean_dist[i] <= cutoff;
  result.cloud = filter_points(cloud, keep);
  return result;
}

PointCloud crop_roi(const PointCloud& cloud, const RoiBox& roi) {
  if (roi.full) return cloud;
  std::vector<char> keep(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    keep[i] = roi.contains(cloud.points[i]);
  return filter_points(cloud, keep);
}

PointCloud subsample_stride(const PointCloud& cloud, std::size_t max_points) {
  if (max_points == 0)
    fail(ErrorKind::parameter, "max_points must be positive");
  if (cloud.size() <= max_points) return cloud;
  std::size_t stride = (cloud.size() + max_points - 1) / max_points;
  std::vector<char> keep(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); i += stride) keep[i] = 1;
  return filter_points(cloud, keep);
}

}  // namespace breathscope
