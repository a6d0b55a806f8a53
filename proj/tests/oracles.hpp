// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Independent reference implementations. These are deliberately naive and
// share no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mvaug/types.hpp"

namespace mvaug::oracle {

struct Window {
  int start, end, close_idx;
  std::optional<int> open_idx;
};

/// Classifies every index, then walks run boundaries one index at a time.
inline std::vector<Window> windows(const std::vector<std::uint8_t>& closed, int pre, int post) {
  const int T = static_cast<int>(closed.size());
  std::vector<Window> out;
  for (int i = 0; i < T; ++i) {
    const bool starts_run = closed[i] && (i == 0 || !closed[i - 1]);
    if (!starts_run) continue;
    int j = i;
    while (j < T && closed[j]) ++j;
    Window w;
    w.close_idx = i;
    w.start = i - pre < 0 ? 0 : i - pre;
    if (j < T) {
      w.open_idx = j;
      w.end = j + post > T - 1 ? T - 1 : j + post;
    } else {
      w.end = T - 1;
    }
    out.push_back(w);
  }
  return out;
}

/// Smallest 4N+1 that is >= L, by search.
inline int padded(int L) {
  int p = 1;
  while (p < L) p += 4;
  return p;
}

/// Sequential floor-rank cascade over score columns. Returns surviving
/// original indices. `cols[s][i]` is asset i's score at stage s; stage 1 is
/// resolution (both tails).
inline std::vector<int> cascade(const std::vector<std::vector<double>>& cols) {
  std::vector<int> alive(cols[0].size());
  std::iota(alive.begin(), alive.end(), 0);
  auto drop_lowest = [&](int stage, int k) {
    std::vector<int> order = alive;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cols[stage][a] < cols[stage][b]; });
    std::vector<int> removed(order.begin(), order.begin() + k);
    std::vector<int> next;
    for (int a : alive)
      if (std::find(removed.begin(), removed.end(), a) == removed.end()) next.push_back(a);
    alive = next;
  };
  auto drop_highest = [&](int stage, int k) {
    std::vector<int> order = alive;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cols[stage][a] > cols[stage][b]; });
    std::vector<int> removed(order.begin(), order.begin() + k);
    std::vector<int> next;
    for (int a : alive)
      if (std::find(removed.begin(), removed.end(), a) == removed.end()) next.push_back(a);
    alive = next;
  };
  int n = static_cast<int>(alive.size());
  drop_lowest(0, n * 50 / 100);
  n = static_cast<int>(alive.size());
  const int tail = n * 10 / 100;
  drop_lowest(1, tail);
  drop_highest(1, tail);
  n = static_cast<int>(alive.size());
  drop_lowest(2, n * 30 / 100);
  n = static_cast<int>(alive.size());
  drop_lowest(3, n * 60 / 100);
  return alive;
}

/// n4 closed form for all-distinct scores.
inline int cascade_n4(int n) {
  const int n1 = n - static_cast<int>(std::floor(0.5 * n));
  const int n2 = n1 - 2 * static_cast<int>(std::floor(0.1 * n1));
  const int n3 = n2 - static_cast<int>(std::floor(0.3 * n2));
  return n3 - static_cast<int>(std::floor(0.6 * n3));
}

/// Per-block, per-channel means of frames [first, last] over s x s blocks.
inline std::vector<double> block_means(const Video& v, int first, int last, int s) {
  const int H = v[0].height, W = v[0].width;
  std::vector<double> out;
  for (int by = 0; by < H / s; ++by)
    for (int bx = 0; bx < W / s; ++bx)
      for (int c = 0; c < 3; ++c) {
        double sum = 0;
        int n = 0;
        for (int t = first; t <= last; ++t)
          for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x, ++n) sum += v[t].at(by * s + y, bx * s + x)[c];
        out.push_back(sum / n);
      }
  return out;
}

/// Variance of the 4-neighbour Laplacian of luma, edge-replicated, by direct
/// convolution.
inline double laplacian_variance(const Image& img) {
  const int H = img.height, W = img.width;
  auto luma = [&](int y, int x) {
    y = std::clamp(y, 0, H - 1);
    x = std::clamp(x, 0, W - 1);
    const std::uint8_t* p = img.at(y, x);
    return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  };
  const int k[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  std::vector<double> r;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) acc += k[dy + 1][dx + 1] * luma(y + dy, x + dx);
      r.push_back(acc);
    }
  double mean = 0;
  for (double v : r) mean += v;
  mean /= r.size();
  double var = 0;
  for (double v : r) var += (v - mean) * (v - mean);
  return var / r.size();
}

/// Neighbourhood-majority filter with edge replication.
inline Mask majority(const Mask& m, int k) {
  Mask out(m.height, m.width);
  const int r = k / 2;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      int on = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          on += m.get(std::clamp(y + dy, 0, m.height - 1), std::clamp(x + dx, 0, m.width - 1));
      out.set(y, x, 2 * on > k * k);
    }
  return out;
}

struct Rect {
  int x, y, w, h;
};

inline bool overlaps(const Rect& a, const Rect& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

/// Multiset intersection of raw s x s block contents.
inline long block_matches(const Image& a, const Image& b, int s) {
  auto blocks = [s](const Image& img) {
    std::map<std::vector<std::uint8_t>, long> m;
    for (int by = 0; by + s <= img.height; by += s)
      for (int bx = 0; bx + s <= img.width; bx += s) {
        std::vector<std::uint8_t> blk;
        for (int y = 0; y < s; ++y)
          for (int x = 0; x < s; ++x)
            for (int c = 0; c < 3; ++c) blk.push_back(img.at(by + y, bx + x)[c]);
        ++m[blk];
      }
    return m;
  };
  const auto ma = blocks(a), mb = blocks(b);
  long n = 0;
  for (const auto& [k, v] : ma) {
    auto it = mb.find(k);
    if (it != mb.end()) n += std::min(v, it->second);
  }
  return n;
}

/// Lowest-cost 2-means split among the Voronoi partitions induced by every
/// pair of input points. Exact for well-separated clusters, which is all the
/// tests need.
inline std::vector<int> two_means(const std::vector<Point>& pts) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_lab(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      std::vector<int> lab(pts.size());
      for (std::size_t p = 0; p < pts.size(); ++p) {
        const double di = std::hypot(pts[p].x - pts[i].x, pts[p].y - pts[i].y);
        const double dj = std::hypot(pts[p].x - pts[j].x, pts[p].y - pts[j].y);
        lab[p] = dj < di ? 1 : 0;
      }
      double cx[2] = {0, 0}, cy[2] = {0, 0}, n[2] = {0, 0};
      for (std::size_t p = 0; p < pts.size(); ++p) cx[lab[p]] += pts[p].x, cy[lab[p]] += pts[p].y, ++n[lab[p]];
      if (n[0] == 0 || n[1] == 0) continue;
      double cost = 0;
      for (std::size_t p = 0; p < pts.size(); ++p) {
        const int l = lab[p];
        cost += std::pow(pts[p].x - cx[l] / n[l], 2) + std::pow(pts[p].y - cy[l] / n[l], 2);
      }
      if (cost < best) best = cost, best_lab = lab;
    }
  return best_lab;
}

/// Naive C += A * B with A n x k, B k x m.
inline void gemm(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& c, int n, int k,
                 int m) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0;
      for (int p = 0; p < k; ++p) s += a[i * k + p] * b[p * m + j];
      c[i * m + j] += s;
    }
}

/// Pearson chi-square statistic of `counts` against a uniform expectation.
inline double chi_square_uniform(const std::vector<long>& counts) {
  double total = 0;
  for (long c : counts) total += c;
  const double e = total / counts.size();
  double chi = 0;
  for (long c : counts) chi += (c - e) * (c - e) / e;
  return chi;
}

}  // namespace mvaug::oracle
