// Copyright 2026 The mvaug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP variant in kernels::omp. The two must be
// bit-identical: every output element is accumulated in the same order.
// Callers use the unqualified names, which resolve to the OpenMP variant when
// the library is built with MVAUG_OPENMP.

#include <cstdint>
#include <span>

namespace mvaug::kernels {

namespace serial {

/// C (n x m) += A (n x k) * B (k x m), all row-major.
void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
              int k, int m);
/// C (n x m) += A (n x k) * B^T where B is (m x k).
void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
                 int k, int m);
/// C (n x m) += A^T * B where A is (k x n) and B is (k x m).
void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
                 int k, int m);
/// Binary median filter over kernel x kernel windows with edge replication.
void majority_filter(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, int h, int w,
                     int kernel);
/// Population variance of the 4-neighbour Laplacian response, edge-replicated.
double laplacian_variance(std::span<const double> gray, int h, int w);
/// Adds the s x s block sums of an interleaved (h x w x 3) frame into
/// `sums` laid out (h/s x w/s x 3).
void block_sum_rgb(std::span<const std::uint8_t> frame, std::span<double> sums, int h, int w,
                   int s);

}  // namespace serial

namespace omp {

void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
              int k, int m);
void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
                 int k, int m);
void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c, int n,
                 int k, int m);
void majority_filter(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, int h, int w,
                     int kernel);
double laplacian_variance(std::span<const double> gray, int h, int w);
void block_sum_rgb(std::span<const std::uint8_t> frame, std::span<double> sums, int h, int w,
                   int s);

}  // namespace omp

#if defined(MVAUG_OPENMP)
namespace active = omp;
#else
namespace active = serial;
#endif

using active::block_sum_rgb;
using active::gemm_acc;
using active::gemm_nt_acc;
using active::gemm_tn_acc;
using active::laplacian_variance;
using active::majority_filter;

}  // namespace mvaug::kernels
