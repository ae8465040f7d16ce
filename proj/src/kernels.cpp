#include "jsr/kernels.hpp"

#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace jsr {

void gemm(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
          double beta) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        if (beta == 0.0) {
            std::memset(crow, 0, static_cast<size_t>(n) * sizeof(double));
        } else if (beta != 1.0) {
            for (int64_t j = 0; j < n; ++j) crow[j] *= beta;
        }
        const double* arow = a + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_ta(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             double beta) {
    // a is [k x m]; c[i,j] = sum_p a[p,i] * b[p,j]
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        if (beta == 0.0) {
            std::memset(crow, 0, static_cast<size_t>(n) * sizeof(double));
        } else if (beta != 1.0) {
            for (int64_t j = 0; j < n; ++j) crow[j] *= beta;
        }
        for (int64_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_tb(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             double beta) {
    // b is [n x k]; c[i,j] = sum_p a[i,p] * b[j,p]
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = (beta == 0.0) ? acc : beta * crow[j] + acc;
        }
    }
}

int64_t reflect_index(int64_t i, int64_t n) {
    if (n == 1) return 0;
    const int64_t period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return (i < n) ? i : period - i;
}

void correlate2d_reflect(const Tensor& image, const Tensor& kernel, Tensor& out) {
    const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    // accepts (ks,ks) or (1,ks,ks) kernels
    const int64_t ks = kernel.dim(kernel.ndim() - 1);
    const int64_t r = ks / 2;
    if (out.dims() != image.dims()) out = Tensor(image.dims());
    const double* kw = kernel.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t y = 0; y < H; ++y) {
            const double* plane = image.data() + c * H * W;
            double* orow = out.data() + (c * H + y) * W;
            const bool interior_y = (y >= r && y + r < H);
            for (int64_t x = 0; x < W; ++x) {
                double acc = 0.0;
                if (interior_y && x >= r && x + r < W) {
                    for (int64_t ky = 0; ky < ks; ++ky) {
                        const double* irow = plane + (y - r + ky) * W + (x - r);
                        const double* krow = kw + ky * ks;
                        for (int64_t kx = 0; kx < ks; ++kx) acc += krow[kx] * irow[kx];
                    }
                } else {
                    for (int64_t ky = 0; ky < ks; ++ky) {
                        const int64_t sy = reflect_index(y - r + ky, H);
                        const double* irow = plane + sy * W;
                        const double* krow = kw + ky * ks;
                        for (int64_t kx = 0; kx < ks; ++kx)
                            acc += krow[kx] * irow[reflect_index(x - r + kx, W)];
                    }
                }
                orow[x] = acc;
            }
        }
    }
}

void im2col(const Tensor& x, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
            std::vector<double>& col, int64_t& oh, int64_t& ow) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    oh = (H + 2 * pad - kh) / stride + 1;
    ow = (W + 2 * pad - kw) / stride + 1;
    const int64_t cols = N * oh * ow;
    col.assign(static_cast<size_t>(C * kh * kw * cols), 0.0);
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                double* crow = col.data() + ((c * kh + ky) * kw + kx) * cols;
                for (int64_t n = 0; n < N; ++n) {
                    const double* plane = x.data() + (n * C + c) * H * W;
                    for (int64_t y = 0; y < oh; ++y) {
                        const int64_t sy = y * stride - pad + ky;
                        double* dst = crow + (n * oh + y) * ow;
                        if (sy < 0 || sy >= H) continue;  // already zero
                        const double* srow = plane + sy * W;
                        for (int64_t xo = 0; xo < ow; ++xo) {
                            const int64_t sx = xo * stride - pad + kx;
                            if (sx >= 0 && sx < W) dst[xo] = srow[sx];
                        }
                    }
                }
            }
        }
    }
}

void col2im_add(const std::vector<double>& col, int64_t kh, int64_t kw, int64_t stride,
                int64_t pad, Tensor& dx, int64_t oh, int64_t ow) {
    const int64_t N = dx.dim(0), C = dx.dim(1), H = dx.dim(2), W = dx.dim(3);
    const int64_t cols = N * oh * ow;
    // Parallel over channels: every (c,*) scatter touches only channel c.
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
                const double* crow = col.data() + ((c * kh + ky) * kw + kx) * cols;
                for (int64_t n = 0; n < N; ++n) {
                    double* plane = dx.data() + (n * C + c) * H * W;
                    for (int64_t y = 0; y < oh; ++y) {
                        const int64_t sy = y * stride - pad + ky;
                        if (sy < 0 || sy >= H) continue;
                        const double* srow = crow + (n * oh + y) * ow;
                        double* drow = plane + sy * W;
                        for (int64_t xo = 0; xo < ow; ++xo) {
                            const int64_t sx = xo * stride - pad + kx;
                            if (sx >= 0 && sx < W) drow[sx] += srow[xo];
                        }
                    }
                }
            }
        }
    }
}

namespace ref {

void correlate2d_reflect_naive(const Tensor& image, const Tensor& kernel, Tensor& out) {
    const int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const int64_t ks = kernel.dim(kernel.ndim() - 1);
    const int64_t r = ks / 2;
    const double* kw = kernel.data();
    if (out.dims() != image.dims()) out = Tensor(image.dims());
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int64_t ky = 0; ky < ks; ++ky)
                    for (int64_t kx = 0; kx < ks; ++kx) {
                        const int64_t sy = reflect_index(y - r + ky, H);
                        const int64_t sx = reflect_index(x - r + kx, W);
                        acc += kw[ky * ks + kx] * image.at3(c, sy, sx);
                    }
                out.at3(c, y, x) = acc;
            }
}

void gemm_naive(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
}

void conv2d_naive(const Tensor& x, const Tensor& w, const Tensor& bias, int64_t stride,
                  int64_t pad, Tensor& out) {
    const int64_t N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t oh = (H + 2 * pad - kh) / stride + 1;
    const int64_t ow = (W + 2 * pad - kw) / stride + 1;
    out = Tensor({N, Co, oh, ow});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t co = 0; co < Co; ++co)
            for (int64_t y = 0; y < oh; ++y)
                for (int64_t xo = 0; xo < ow; ++xo) {
                    double acc = bias.empty() ? 0.0 : bias[co];
                    for (int64_t ci = 0; ci < Ci; ++ci)
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const int64_t sy = y * stride - pad + ky;
                                const int64_t sx = xo * stride - pad + kx;
                                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                                acc += w.at4(co, ci, ky, kx) * x.at4(n, ci, sy, sx);
                            }
                    out.at4(n, co, y, xo) = acc;
                }
}

}  // namespace ref

}  // namespace jsr
