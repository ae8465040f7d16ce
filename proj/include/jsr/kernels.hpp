#pragma once

#include "jsr/tensor.hpp"

namespace jsr {

// OpenMP-parallel compute kernels. Accumulation order per output element is
// fixed (parallelism is across independent outputs), so results are
// bit-identical regardless of thread count.

/// C[m x n] = A[m x k] * B[k x n], row-major. beta=0 overwrites C.
void gemm(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
          double beta = 0.0);

/// C[m x n] = A^T[k x m]^T... i.e. C = A_t * B where A_t is the transpose of
/// A[k x m] stored row-major.
void gemm_ta(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             double beta = 0.0);

/// C[m x n] = A[m x k] * B_t, B stored as [n x k] row-major (B transposed).
void gemm_tb(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             double beta = 0.0);

/// Reflect-index helper: maps i into [0, n) by mirroring without edge repeat
/// when possible (n==1 collapses to 0).
int64_t reflect_index(int64_t i, int64_t n);

/// Per-channel 2-D correlation of a (C,H,W) image with an odd square kernel,
/// reflect-padded; output shape equals input shape.
void correlate2d_reflect(const Tensor& image, const Tensor& kernel, Tensor& out);

/// im2col for (N,C,H,W) input, kernel kh x kw, stride, zero padding.
/// col has shape [C*kh*kw, N*oh*ow] row-major.
void im2col(const Tensor& x, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
            std::vector<double>& col, int64_t& oh, int64_t& ow);

/// Scatter-add the column buffer back to (N,C,H,W) gradient (inverse of im2col).
void col2im_add(const std::vector<double>& col, int64_t kh, int64_t kw, int64_t stride,
                int64_t pad, Tensor& dx, int64_t oh, int64_t ow);

namespace ref {

/// Serial quadruple-loop reference for correlate2d_reflect; kept as the
/// independent oracle for tests and for the kernel benchmark.
void correlate2d_reflect_naive(const Tensor& image, const Tensor& kernel, Tensor& out);

/// Serial gemm reference.
void gemm_naive(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c);

/// Serial direct convolution (cross-correlation) for (N,C,H,W) input with
/// weights (Co,Ci,kh,kw), zero padding.
void conv2d_naive(const Tensor& x, const Tensor& w, const Tensor& bias, int64_t stride,
                  int64_t pad, Tensor& out);

}  // namespace ref

}  // namespace jsr
