#include "breathscope/stereo.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>

#include "breathscope/frame_io.hpp"

namespace breathscope {

namespace {

constexpr std::int32_t kNoCost = std::numeric_limits<std::int32_t>::max();

// Full SAD cost volume, kNoCost where the window leaves either image.
struct CostVolume {
  int width = 0;
  int height = 0;
  int dmin = 0;
  int count = 0;  // number of candidate disparities
  std::vector<std::int32_t> cost;

  std::int32_t at(int u, int v, int di) const {
    return cost[(static_cast<std::size_t>(v) * width + u) * count + di];
  }
  std::int32_t& at(int u, int v, int di) {
    return cost[(static_cast<std::size_t>(v) * width + u) * count + di];
  }
};

CostVolume build_cost_volume(const GrayImage& left, const GrayImage& right,
                             const MatchParams& p) {
  const int w = left.width, h = left.height, r = p.block_radius;
  CostVolume vol;
  vol.width = w;
  vol.height = h;
  vol.dmin = p.min_disparity;
  vol.count = p.max_disparity - p.min_disparity + 1;
  vol.cost.assign(static_cast<std::size_t>(w) * h * vol.count, kNoCost);

  std::vector<std::int32_t> ad(static_cast<std::size_t>(w) * h);
  std::vector<std::int32_t> hsum(static_cast<std::size_t>(w) * h);

  for (int di = 0; di < vol.count; ++di) {
    const int d = vol.dmin + di;
    if (d >= w) break;
    // Absolute differences for this shift.
    for (int v = 0; v < h; ++v) {
      const std::uint8_t* lrow = left.data.data() + static_cast<std::size_t>(v) * w;
      const std::uint8_t* rrow = right.data.data() + static_cast<std::size_t>(v) * w;
      std::int32_t* arow = ad.data() + static_cast<std::size_t>(v) * w;
      for (int u = d; u < w; ++u)
        arow[u] = std::abs(static_cast<int>(lrow[u]) - static_cast<int>(rrow[u - d]));
    }
    const int u_lo = d + r, u_hi = w - 1 - r;
    if (u_lo > u_hi) continue;
    // Horizontal box sums.
    for (int v = 0; v < h; ++v) {
      const std::int32_t* arow = ad.data() + static_cast<std::size_t>(v) * w;
      std::int32_t* hrow = hsum.data() + static_cast<std::size_t>(v) * w;
      std::int32_t acc = 0;
      for (int u = d; u <= d + 2 * r && u < w; ++u) acc += arow[u];
      hrow[u_lo] = acc;
      for (int u = u_lo + 1; u <= u_hi; ++u) {
        acc += arow[u + r] - arow[u - r - 1];
        hrow[u] = acc;
      }
    }
    // Vertical box sums, column by column.
    for (int u = u_lo; u <= u_hi; ++u) {
      std::int32_t acc = 0;
      for (int v = 0; v <= 2 * r && v < h; ++v)
        acc += hsum[static_cast<std::size_t>(v) * w + u];
      if (h < 2 * r + 1) continue;
      vol.at(u, r, di) = acc;
      for (int v = r + 1; v <= h - 1 - r; ++v) {
        acc += hsum[static_cast<std::size_t>(v + r) * w + u] -
               hsum[static_cast<std::size_t>(v - r - 1) * w + u];
        vol.at(u, v, di) = acc;
      }
    }
  }
  return vol;
}

// Population variance of the (2r+1)^2 window centered at (u, v).
struct WindowVariance {
  int width = 0, height = 0, radius = 0;
  std::vector<double> sum;
  std::vector<double> sum_sq;

  WindowVariance(const GrayImage& img, int r)
      : width(img.width), height(img.height), radius(r) {
    // integral images with one row/column of zero padding
    std::size_t iw = width + 1, ih = height + 1;
    sum.assign(iw * ih, 0.0);
    sum_sq.assign(iw * ih, 0.0);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = img.at(x, y);
        std::size_t i = static_cast<std::size_t>(y + 1) * iw + x + 1;
        sum[i] = v + sum[i - 1] + sum[i - iw] - sum[i - iw - 1];
        sum_sq[i] = v * v + sum_sq[i - 1] + sum_sq[i - iw] - sum_sq[i - iw - 1];
      }
    }
  }

  double variance(int u, int v) const {
    std::size_t iw = width + 1;
    int x0 = u - radius, y0 = v - radius;
    int x1 = u + radius + 1, y1 = v + radius + 1;
    auto rect = [&](const std::vector<double>& t) {
      return t[static_cast<std::size_t>(y1) * iw + x1] -
             t[static_cast<std::size_t>(y0) * iw + x1] -
             t[static_cast<std::size_t>(y1) * iw + x0] +
             t[static_cast<std::size_t>(y0) * iw + x0];
    };
    double n = static_cast<double>(2 * radius + 1) * (2 * radius + 1);
    double s = rect(sum);
    double s2 = rect(sum_sq);
    return (s2 - s * s / n) / n;
  }
};

void check_match_inputs(const GrayImage& left, const GrayImage& right,
                        const MatchParams& p) {
  if (!left.same_size(right))
    fail(ErrorKind::parameter, "stereo pair dimensions differ");
  if (p.min_disparity < 0 || p.min_disparity >= p.max_disparity)
    fail(ErrorKind::parameter, "disparity range must satisfy 0 <= min < max");
  if (p.block_radius < 1)
    fail(ErrorKind::parameter, "block radius must be at least 1");
}

DisparityMap match(const GrayImage& left, const GrayImage& right,
                   const MatchParams& p, bool subpixel) {
  check_match_inputs(left, right, p);
  const int w = left.width, h = left.height;
  CostVolume vol = build_cost_volume(left, right, p);
  WindowVariance tex(left, p.block_radius);
  DisparityMap out = DisparityMap::invalid_map(w, h);

  // Right-view winner for the consistency check. cost_R(u_r, d) equals
  // cost_L(u_r + d, d), so the volume is shared.
  std::vector<int> right_best;
  if (p.lr_consistency_tol_px >= 0.0) {
    right_best.assign(static_cast<std::size_t>(w) * h, -1);
    for (int v = 0; v < h; ++v) {
      for (int ur = 0; ur < w; ++ur) {
        std::int32_t best = kNoCost;
        int best_d = -1;
        for (int di = 0; di < vol.count; ++di) {
          int ul = ur + vol.dmin + di;
          if (ul >= w) break;
          std::int32_t c = vol.at(ul, v, di);
          if (c < best) {
            best = c;
            best_d = vol.dmin + di;
          }
        }
        right_best[static_cast<std::size_t>(v) * w + ur] = best_d;
      }
    }
  }

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      std::int32_t best = kNoCost;
      int best_di = -1;
      for (int di = 0; di < vol.count; ++di) {
        std::int32_t c = vol.at(u, v, di);
        if (c < best) {
          best = c;
          best_di = di;
        }
      }
      if (best_di < 0) continue;  // window never fit

      if (tex.variance(u, v) < p.texture_threshold) continue;

      // Uniqueness: the best cost must beat every candidate outside +-1
      // of the winner by the configured ratio.
      std::int32_t second = kNoCost;
      for (int di = 0; di < vol.count; ++di) {
        if (std::abs(di - best_di) <= 1) continue;
        std::int32_t c = vol.at(u, v, di);
        if (c < second) second = c;
      }
      if (second != kNoCost &&
          static_cast<double>(best) * p.uniqueness_ratio >
              static_cast<double>(second))
        continue;

      int d_star = vol.dmin + best_di;
      if (p.lr_consistency_tol_px >= 0.0) {
        int ur = u - d_star;
        int dr = (ur >= 0) ? right_best[static_cast<std::size_t>(v) * w + ur] : -1;
        if (dr < 0 || std::abs(dr - d_star) > p.lr_consistency_tol_px) continue;
      }

      double value = d_star;
      if (subpixel && best_di > 0 && best_di + 1 < vol.count) {
        std::int32_t cm = vol.at(u, v, best_di - 1);
        std::int32_t cp = vol.at(u, v, best_di + 1);
        if (cm != kNoCost && cp != kNoCost) {
          double denom = static_cast<double>(cm) - 2.0 * best + cp;
          if (denom > 0.0) value += (cm - cp) / (2.0 * denom);
        }
      }
      out.at(u, v) = static_cast<float>(value);
    }
  }
  return out;
}

}  // namespace

DisparityMap block_match_integer(const GrayImage& left, const GrayImage& right,
                                 const MatchParams& params) {
  return match(left, right, params, false);
}

DisparityMap compute_disparity(const GrayImage& left, const GrayImage& right,
                               const MatchParams& params) {
  return match(left, right, params, true);
}

DisparityMap filter_disparity(const DisparityMap& map, int median_radius,
                              int speckle_max_area, double speckle_tol) {
  if (median_radius < 0 || speckle_max_area < 0)
    fail(ErrorKind::parameter, "filter parameters must be non-negative");
  const int w = map.width, h = map.height;
  DisparityMap cur = map;

  if (median_radius > 0) {
    DisparityMap filtered = DisparityMap::invalid_map(w, h);
    std::vector<float> window;
    window.reserve(static_cast<std::size_t>(2 * median_radius + 1) *
                   (2 * median_radius + 1));
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (!cur.valid(u, v)) continue;
        window.clear();
        int in_bounds = 0;
        for (int dy = -median_radius; dy <= median_radius; ++dy) {
          int y = v + dy;
          if (y < 0 || y >= h) continue;
          for (int dx = -median_radius; dx <= median_radius; ++dx) {
            int x = u + dx;
            if (x < 0 || x >= w) continue;
            ++in_bounds;
            if (cur.valid(x, y)) window.push_back(cur.at(x, y));
          }
        }
        // fewer than half the (in-bounds) window valid -> drop the pixel
        if (static_cast<int>(window.size()) * 2 < in_bounds) continue;
        auto mid = window.begin() + (window.size() - 1) / 2;
        std::nth_element(window.begin(), mid, window.end());
        filtered.at(u, v) = *mid;
      }
    }
    cur = std::move(filtered);
  }

  if (speckle_max_area > 0) {
    std::vector<std::int8_t> seen(static_cast<std::size_t>(w) * h, 0);
    std::vector<std::pair<int, int>> component;
    std::deque<std::pair<int, int>> queue;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        std::size_t idx = static_cast<std::size_t>(v) * w + u;
        if (seen[idx] || !cur.valid(u, v)) continue;
        component.clear();
        queue.clear();
        queue.emplace_back(u, v);
        seen[idx] = 1;
        while (!queue.empty()) {
          auto [x, y] = queue.front();
          queue.pop_front();
          component.emplace_back(x, y);
          const int nx[4] = {x - 1, x + 1, x, x};
          const int ny[4] = {y, y, y - 1, y + 1};
          for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
            std::size_t nidx = static_cast<std::size_t>(ny[k]) * w + nx[k];
            if (seen[nidx] || !cur.valid(nx[k], ny[k])) continue;
            if (std::abs(cur.at(nx[k], ny[k]) - cur.at(x, y)) > speckle_tol)
              continue;
            seen[nidx] = 1;
            queue.emplace_back(nx[k], ny[k]);
          }
        }
        if (static_cast<int>(component.size()) < speckle_max_area) {
          for (auto [x, y] : component)
            cur.at(x, y) = std::numeric_limits<float>::quiet_NaN();
        }
      }
    }
  }
  return cur;
}

void write_disparity_pgm16(const DisparityMap& map,
                           const std::filesystem::path& path) {
  std::vector<std::uint16_t> data(map.values.size(), 0);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    float v = map.values[i];
    if (!std::isfinite(v)) continue;
    long scaled = std::lround(v * 256.0);
    data[i] = static_cast<std::uint16_t>(std::clamp(scaled, 0L, 65535L));
  }
  write_pgm16(path, data, map.width, map.height);
}

}  // namespace breathscope
