// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels. Keep the per-element accumulation order in sync
// with kernels_omp.cpp; the tests compare the two bit for bit.

#include <algorithm>
#include <vector>

#include "mvaug/kernels.hpp"

namespace mvaug::kernels::serial {

void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
              int k, int m) {
  for (int i = 0; i < n; ++i) {
    double* crow = c.data() + static_cast<std::size_t>(i) * m;
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.data() + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
                 int k, int m) {
  std::vector<double> bt(static_cast<std::size_t>(k) * m);
  for (int j = 0; j < m; ++j)
    for (int p = 0; p < k; ++p) bt[static_cast<std::size_t>(p) * m + j] = b[static_cast<std::size_t>(j) * k + p];
  gemm_acc(a, bt, c, n, k, m);
}

void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
                 int k, int m) {
  for (int i = 0; i < n; ++i) {
    double* crow = c.data() + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = a[static_cast<std::size_t>(p) * n + i];
      const double* brow = b.data() + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

void majority_filter(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, int h, int w,
                     int kernel) {
  const int r = kernel / 2;
  const int threshold = kernel * kernel / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int count = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -r; dx <= r; ++dx) {
          count += in[static_cast<std::size_t>(sy) * w + std::clamp(x + dx, 0, w - 1)] ? 1 : 0;
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = count > threshold ? 1 : 0;
    }
  }
}

namespace {

double laplacian_at(std::span<const double> g, int h, int w, int y, int x) {
  auto px = [&](int yy, int xx) {
    return g[static_cast<std::size_t>(std::clamp(yy, 0, h - 1)) * w + std::clamp(xx, 0, w - 1)];
  };
  return px(y - 1, x) + px(y + 1, x) + px(y, x - 1) + px(y, x + 1) - 4.0 * px(y, x);
}

}  // namespace

double laplacian_variance(std::span<const double> gray, int h, int w) {
  if (h <= 0 || w <= 0) return 0.0;
  std::vector<double> row_sum(h, 0.0), row_sq(h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = laplacian_at(gray, h, w, y, x);
      row_sum[y] += v;
    }
  }
  double total = 0.0;
  for (double s : row_sum) total += s;
  const double n = static_cast<double>(h) * w;
  const double mean = total / n;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = laplacian_at(gray, h, w, y, x) - mean;
      row_sq[y] += d * d;
    }
  }
  double sq = 0.0;
  for (double s : row_sq) sq += s;
  return sq / n;
}

void block_sum_rgb(std::span<const std::uint8_t> frame, std::span<double> sums, int h, int w,
                   int s) {
  const int bw = w / s;
  for (int by = 0; by < h / s; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      double acc[3] = {0, 0, 0};
      for (int y = by * s; y < (by + 1) * s; ++y) {
        const std::uint8_t* row = frame.data() + (static_cast<std::size_t>(y) * w + bx * s) * 3;
        for (int x = 0; x < s * 3; x += 3) {
          acc[0] += row[x];
          acc[1] += row[x + 1];
          acc[2] += row[x + 2];
        }
      }
      double* out = sums.data() + (static_cast<std::size_t>(by) * bw + bx) * 3;
      out[0] += acc[0];
      out[1] += acc[1];
      out[2] += acc[2];
    }
  }
}

}  // namespace mvaug::kernels::serial
