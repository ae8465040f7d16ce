#include "jsr/netops.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "jsr/kernels.hpp"

namespace jsr::ops {

Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

void topo_sort(const Var& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

void require_4d(const Var& x, const char* op) {
    if (x->value.ndim() != 4)
        throw InvalidParameter(std::string(op) + " expects an (N,C,H,W) input, got " +
                               x->value.shape_str());
}

}  // namespace

void backward(const Var& root) {
    if (root->value.size() != 1) throw InvalidParameter("backward expects a scalar root");
    std::vector<Node*> post;
    topo_sort(root, post);
    root->ensure_grad()[0] = 1.0;
    for (auto it = post.rbegin(); it != post.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

// ---------------------------------------------------------------- conv2d

namespace {

void conv_dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride,
                        int64_t pad, Tensor& y) {
    const int64_t N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
        y = Tensor({N, Co, H, W});
        const int64_t hw = H * W;
        for (int64_t n = 0; n < N; ++n)
            gemm(Co, hw, Ci, w.data(), x.data() + n * Ci * hw, y.data() + n * Co * hw);
    } else {
        std::vector<double> col;
        int64_t oh, ow;
        im2col(x, kh, kw, stride, pad, col, oh, ow);
        y = Tensor({N, Co, oh, ow});
        const int64_t K = Ci * kh * kw;
        const int64_t cols = N * oh * ow;
        // y is (N,Co,oh,ow) but gemm gives (Co, N*oh*ow); transpose batches.
        if (N == 1) {
            gemm(Co, cols, K, w.data(), col.data(), y.data());
        } else {
            std::vector<double> tmp(static_cast<size_t>(Co * cols));
            gemm(Co, cols, K, w.data(), col.data(), tmp.data());
            const int64_t hw = oh * ow;
#pragma omp parallel for collapse(2) schedule(static)
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < Co; ++c)
                    std::copy_n(tmp.data() + (c * N + n) * hw, hw, y.data() + (n * Co + c) * hw);
        }
    }
    if (!b.empty()) {
        const int64_t hw = y.dim(2) * y.dim(3);
#pragma omp parallel for collapse(2) schedule(static)
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < Co; ++c) {
                double* row = y.data() + (n * Co + c) * hw;
                const double bv = b[c];
                for (int64_t i = 0; i < hw; ++i) row[i] += bv;
            }
    }
}

void conv_depthwise_forward(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride,
                            int64_t pad, Tensor& y) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t kh = w.dim(2), kw = w.dim(3);
    const int64_t oh = (H + 2 * pad - kh) / stride + 1;
    const int64_t ow = (W + 2 * pad - kw) / stride + 1;
    y = Tensor({N, C, oh, ow});
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* plane = x.data() + (n * C + c) * H * W;
            const double* ker = w.data() + c * kh * kw;
            double* out = y.data() + (n * C + c) * oh * ow;
            const double bv = b.empty() ? 0.0 : b[c];
            for (int64_t yo = 0; yo < oh; ++yo)
                for (int64_t xo = 0; xo < ow; ++xo) {
                    double acc = bv;
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        const int64_t sy = yo * stride - pad + ky;
                        if (sy < 0 || sy >= H) continue;
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            const int64_t sx = xo * stride - pad + kx;
                            if (sx < 0 || sx >= W) continue;
                            acc += ker[ky * kw + kx] * plane[sy * W + sx];
                        }
                    }
                    out[(yo * ow) + xo] = acc;
                }
        }
}

}  // namespace

Var conv2d(const Var& x, const Var& weights, const Var& bias, int64_t stride, int64_t pad,
           int64_t groups) {
    require_4d(x, "conv2d");
    const Tensor& xv = x->value;
    const Tensor& wv = weights->value;
    if (wv.ndim() != 4) throw InvalidParameter("conv2d weights must be 4-D");
    const int64_t Ci = xv.dim(1), Co = wv.dim(0);
    const bool depthwise = groups != 1;
    if (depthwise) {
        if (groups != Ci || Co != Ci || wv.dim(1) != 1)
            throw InvalidParameter("conv2d groups must be 1 or depthwise (groups==Ci==Co)");
    } else if (wv.dim(1) != Ci) {
        throw InvalidParameter("conv2d weight channel mismatch: weights " + wv.shape_str() +
                               " vs input " + xv.shape_str());
    }
    if (!bias->value.empty() && bias->value.size() != Co)
        throw InvalidParameter("conv2d bias size mismatch");
    if (xv.dim(2) + 2 * pad < wv.dim(2) || xv.dim(3) + 2 * pad < wv.dim(3))
        throw InvalidParameter("conv2d kernel larger than padded input");

    Tensor y;
    if (depthwise)
        conv_depthwise_forward(xv, wv, bias->value, stride, pad, y);
    else
        conv_dense_forward(xv, wv, bias->value, stride, pad, y);

    return make_node(std::move(y), {x, weights, bias}, [stride, pad, depthwise](Node& node) {
        const Var& xp = node.parents[0];
        const Var& wp = node.parents[1];
        const Var& bp = node.parents[2];
        const Tensor& xv = xp->value;
        const Tensor& wv = wp->value;
        const Tensor& dy = node.grad;
        const int64_t N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
        const int64_t Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
        const int64_t oh = dy.dim(2), ow = dy.dim(3);

        if (bp->requires_grad && !bp->value.empty()) {
            Tensor& db = bp->ensure_grad();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < Co; ++c) {
                    const double* row = dy.data() + (n * Co + c) * oh * ow;
                    double acc = 0.0;
                    for (int64_t i = 0; i < oh * ow; ++i) acc += row[i];
                    db[c] += acc;
                }
        }

        if (depthwise) {
            const Tensor* dxp = xp->requires_grad ? &xp->ensure_grad() : nullptr;
            const Tensor* dwp = wp->requires_grad ? &wp->ensure_grad() : nullptr;
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < Ci; ++c) {
                    const double* gplane = dy.data() + (n * Ci + c) * oh * ow;
                    const double* plane = xv.data() + (n * Ci + c) * H * W;
                    const double* ker = wv.data() + c * kh * kw;
                    for (int64_t yo = 0; yo < oh; ++yo)
                        for (int64_t xo = 0; xo < ow; ++xo) {
                            const double g = gplane[yo * ow + xo];
                            if (g == 0.0) continue;
                            for (int64_t ky = 0; ky < kh; ++ky) {
                                const int64_t sy = yo * stride - pad + ky;
                                if (sy < 0 || sy >= H) continue;
                                for (int64_t kx = 0; kx < kw; ++kx) {
                                    const int64_t sx = xo * stride - pad + kx;
                                    if (sx < 0 || sx >= W) continue;
                                    if (dxp)
                                        const_cast<Tensor*>(dxp)->data()[(n * Ci + c) * H * W +
                                                                         sy * W + sx] +=
                                            g * ker[ky * kw + kx];
                                    if (dwp)
                                        const_cast<Tensor*>(dwp)->data()[c * kh * kw + ky * kw +
                                                                         kx] +=
                                            g * plane[sy * W + sx];
                                }
                            }
                        }
                }
            return;
        }

        const int64_t K = Ci * kh * kw;
        const int64_t hw = oh * ow;
        const int64_t cols = N * hw;
        // dy rearranged to (Co, N*oh*ow)
        std::vector<double> dy_mat(static_cast<size_t>(Co * cols));
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < Co; ++c)
                std::copy_n(dy.data() + (n * Co + c) * hw, hw, dy_mat.data() + (c * N + n) * hw);

        const bool is_1x1 = (kh == 1 && kw == 1 && stride == 1 && pad == 0);
        std::vector<double> col;
        if (!is_1x1) {
            int64_t oh2, ow2;
            im2col(xv, kh, kw, stride, pad, col, oh2, ow2);  // recomputed, not stored
        }
        if (wp->requires_grad) {
            Tensor& dw = wp->ensure_grad();
            if (is_1x1) {
                // col == x rearranged to (Ci, N*H*W)
                std::vector<double> x_mat(static_cast<size_t>(Ci * cols));
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t c = 0; c < Ci; ++c)
                        std::copy_n(xv.data() + (n * Ci + c) * hw, hw,
                                    x_mat.data() + (c * N + n) * hw);
                gemm_tb(Co, K, cols, dy_mat.data(), x_mat.data(), dw.data(), 1.0);
            } else {
                gemm_tb(Co, K, cols, dy_mat.data(), col.data(), dw.data(), 1.0);
            }
        }
        if (xp->requires_grad) {
            Tensor& dx = xp->ensure_grad();
            std::vector<double> dcol(static_cast<size_t>(K * cols));
            gemm_ta(K, cols, Co, wv.data(), dy_mat.data(), dcol.data());
            if (is_1x1) {
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t c = 0; c < Ci; ++c) {
                        const double* src = dcol.data() + (c * N + n) * hw;
                        double* dst = dx.data() + (n * Ci + c) * hw;
                        for (int64_t i = 0; i < hw; ++i) dst[i] += src[i];
                    }
            } else {
                col2im_add(dcol, kh, kw, stride, pad, dx, oh, ow);
            }
        }
    });
}

// ---------------------------------------------------------------- layer_norm

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
    require_4d(x, "layer_norm");
    const Tensor& xv = x->value;
    const int64_t N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    if (gain->value.size() != C || bias->value.size() != C)
        throw InvalidParameter("layer_norm gain/bias must have C elements");
    const int64_t hw = H * W;
    auto xhat = std::make_shared<Tensor>(xv.dims());
    auto istd = std::make_shared<Tensor>(std::vector<int64_t>{N, 1, H, W});
    Tensor y(xv.dims());
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t p = 0; p < hw; ++p) {
            double mean = 0.0;
            for (int64_t c = 0; c < C; ++c) mean += xv.data()[(n * C + c) * hw + p];
            mean /= static_cast<double>(C);
            double var = 0.0;
            for (int64_t c = 0; c < C; ++c) {
                const double d = xv.data()[(n * C + c) * hw + p] - mean;
                var += d * d;
            }
            var /= static_cast<double>(C);
            const double is = 1.0 / std::sqrt(var + eps);
            istd->data()[n * hw + p] = is;
            for (int64_t c = 0; c < C; ++c) {
                const double xh = (xv.data()[(n * C + c) * hw + p] - mean) * is;
                xhat->data()[(n * C + c) * hw + p] = xh;
                y.data()[(n * C + c) * hw + p] = gain->value[c] * xh + bias->value[c];
            }
        }
    return make_node(std::move(y), {x, gain, bias}, [xhat, istd](Node& node) {
        const Var& xp = node.parents[0];
        const Var& gp = node.parents[1];
        const Var& bp = node.parents[2];
        const Tensor& dy = node.grad;
        const int64_t N = dy.dim(0), C = dy.dim(1), hw = dy.dim(2) * dy.dim(3);
        if (gp->requires_grad || bp->requires_grad) {
            Tensor& dg = gp->ensure_grad();
            Tensor& db = bp->ensure_grad();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double* gr = dy.data() + (n * C + c) * hw;
                    const double* xh = xhat->data() + (n * C + c) * hw;
                    double sg = 0.0, sb = 0.0;
                    for (int64_t p = 0; p < hw; ++p) {
                        sg += gr[p] * xh[p];
                        sb += gr[p];
                    }
                    dg[c] += sg;
                    db[c] += sb;
                }
        }
        if (xp->requires_grad) {
            Tensor& dx = xp->ensure_grad();
#pragma omp parallel for collapse(2) schedule(static)
            for (int64_t n = 0; n < N; ++n)
                for (int64_t p = 0; p < hw; ++p) {
                    double m1 = 0.0, m2 = 0.0;
                    for (int64_t c = 0; c < C; ++c) {
                        const double dxh = dy.data()[(n * C + c) * hw + p] * gp->value[c];
                        m1 += dxh;
                        m2 += dxh * xhat->data()[(n * C + c) * hw + p];
                    }
                    m1 /= static_cast<double>(C);
                    m2 /= static_cast<double>(C);
                    const double is = istd->data()[n * hw + p];
                    for (int64_t c = 0; c < C; ++c) {
                        const double dxh = dy.data()[(n * C + c) * hw + p] * gp->value[c];
                        const double xh = xhat->data()[(n * C + c) * hw + p];
                        dx.data()[(n * C + c) * hw + p] += is * (dxh - m1 - xh * m2);
                    }
                }
        }
    });
}

// ---------------------------------------------------------------- simple_gate

Var simple_gate(const Var& x) {
    require_4d(x, "simple_gate");
    const Tensor& xv = x->value;
    const int64_t N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    if (C % 2 != 0) throw InvalidParameter("simple_gate requires an even channel count");
    const int64_t Ch = C / 2, hw = H * W;
    Tensor y({N, Ch, H, W});
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < Ch; ++c) {
            const double* a = xv.data() + (n * C + c) * hw;
            const double* b = xv.data() + (n * C + Ch + c) * hw;
            double* out = y.data() + (n * Ch + c) * hw;
            for (int64_t p = 0; p < hw; ++p) out[p] = a[p] * b[p];
        }
    return make_node(std::move(y), {x}, [](Node& node) {
        const Var& xp = node.parents[0];
        if (!xp->requires_grad) return;
        const Tensor& xv = xp->value;
        const Tensor& dy = node.grad;
        Tensor& dx = xp->ensure_grad();
        const int64_t N = xv.dim(0), C = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
        const int64_t Ch = C / 2;
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < Ch; ++c) {
                const double* a = xv.data() + (n * C + c) * hw;
                const double* b = xv.data() + (n * C + Ch + c) * hw;
                const double* g = dy.data() + (n * Ch + c) * hw;
                double* da = dx.data() + (n * C + c) * hw;
                double* dbp = dx.data() + (n * C + Ch + c) * hw;
                for (int64_t p = 0; p < hw; ++p) {
                    da[p] += g[p] * b[p];
                    dbp[p] += g[p] * a[p];
                }
            }
    });
}

// ---------------------------------------------------------------- sca

Var sca(const Var& x, const Var& weights, const Var& bias) {
    require_4d(x, "sca");
    const Tensor& xv = x->value;
    const int64_t N = xv.dim(0), C = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
    if (weights->value.ndim() != 2 || weights->value.dim(0) != C || weights->value.dim(1) != C)
        throw InvalidParameter("sca weights must be CxC");
    if (bias->value.size() != C) throw InvalidParameter("sca bias must have C elements");
    auto pooled = std::make_shared<Tensor>(std::vector<int64_t>{N, C});
    auto attn = std::make_shared<Tensor>(std::vector<int64_t>{N, C});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* row = xv.data() + (n * C + c) * hw;
            double acc = 0.0;
            for (int64_t p = 0; p < hw; ++p) acc += row[p];
            pooled->data()[n * C + c] = acc / static_cast<double>(hw);
        }
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            double acc = bias->value[c];
            const double* wrow = weights->value.data() + c * C;
            for (int64_t k = 0; k < C; ++k) acc += wrow[k] * pooled->data()[n * C + k];
            attn->data()[n * C + c] = acc;
        }
    Tensor y(xv.dims());
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double a = attn->data()[n * C + c];
            const double* row = xv.data() + (n * C + c) * hw;
            double* out = y.data() + (n * C + c) * hw;
            for (int64_t p = 0; p < hw; ++p) out[p] = row[p] * a;
        }
    return make_node(std::move(y), {x, weights, bias}, [pooled, attn](Node& node) {
        const Var& xp = node.parents[0];
        const Var& wp = node.parents[1];
        const Var& bp = node.parents[2];
        const Tensor& xv = xp->value;
        const Tensor& dy = node.grad;
        const int64_t N = xv.dim(0), C = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
        // da[n,c] = sum_p dy * x
        Tensor da({N, C});
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                const double* g = dy.data() + (n * C + c) * hw;
                const double* row = xv.data() + (n * C + c) * hw;
                double acc = 0.0;
                for (int64_t p = 0; p < hw; ++p) acc += g[p] * row[p];
                da[n * C + c] = acc;
            }
        if (wp->requires_grad) {
            Tensor& dw = wp->ensure_grad();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c)
                    for (int64_t k = 0; k < C; ++k)
                        dw[c * C + k] += da[n * C + c] * pooled->data()[n * C + k];
        }
        if (bp->requires_grad) {
            Tensor& db = bp->ensure_grad();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) db[c] += da[n * C + c];
        }
        if (xp->requires_grad) {
            Tensor& dx = xp->ensure_grad();
            for (int64_t n = 0; n < N; ++n) {
                for (int64_t c = 0; c < C; ++c) {
                    // via attn: dy * a; via pool: (1/hw) sum_k W[k,c] da[k]
                    double dpool = 0.0;
                    for (int64_t k = 0; k < C; ++k)
                        dpool += wp->value[k * C + c] * da[n * C + k];
                    dpool /= static_cast<double>(hw);
                    const double a = attn->data()[n * C + c];
                    const double* g = dy.data() + (n * C + c) * hw;
                    double* dst = dx.data() + (n * C + c) * hw;
                    for (int64_t p = 0; p < hw; ++p) dst[p] += g[p] * a + dpool;
                }
            }
        }
    });
}

// ---------------------------------------------------------------- pixel_shuffle

Tensor pixel_shuffle_forward(const Tensor& x, int64_t r) {
    if (r < 1) throw InvalidParameter("pixel_shuffle factor must be >= 1");
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (C % (r * r) != 0)
        throw InvalidParameter("pixel_shuffle: channels " + std::to_string(C) +
                               " not divisible by r^2=" + std::to_string(r * r));
    if (r == 1) return x;
    const int64_t Co = C / (r * r);
    Tensor y({N, Co, H * r, W * r});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < Co; ++c)
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < r; ++j) {
                    const int64_t ci = c * r * r + i * r + j;
                    for (int64_t h = 0; h < H; ++h)
                        for (int64_t w = 0; w < W; ++w)
                            y.at4(n, c, r * h + i, r * w + j) = x.at4(n, ci, h, w);
                }
    return y;
}

Tensor pixel_unshuffle(const Tensor& x, int64_t r) {
    if (r < 1) throw InvalidParameter("pixel_unshuffle factor must be >= 1");
    if (r == 1) return x;
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % r != 0 || W % r != 0) throw InvalidParameter("pixel_unshuffle: dims not divisible");
    Tensor y({N, C * r * r, H / r, W / r});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < r; ++j) {
                    const int64_t ci = c * r * r + i * r + j;
                    for (int64_t h = 0; h < H / r; ++h)
                        for (int64_t w = 0; w < W / r; ++w)
                            y.at4(n, ci, h, w) = x.at4(n, c, r * h + i, r * w + j);
                }
    return y;
}

Var pixel_shuffle(const Var& x, int64_t r) {
    require_4d(x, "pixel_shuffle");
    Tensor y = pixel_shuffle_forward(x->value, r);
    return make_node(std::move(y), {x}, [r](Node& node) {
        const Var& xp = node.parents[0];
        if (!xp->requires_grad) return;
        Tensor g = pixel_unshuffle(node.grad, r);
        Tensor& dx = xp->ensure_grad();
        for (int64_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    });
}

// ---------------------------------------------------------------- misc

Var relu(const Var& x) {
    Tensor y = x->value;
    for (auto& v : y.vec()) v = std::max(v, 0.0);
    return make_node(std::move(y), {x}, [](Node& node) {
        const Var& xp = node.parents[0];
        if (!xp->requires_grad) return;
        Tensor& dx = xp->ensure_grad();
        for (int64_t i = 0; i < dx.size(); ++i)
            if (xp->value[i] > 0.0) dx[i] += node.grad[i];
    });
}

Var add(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value))
        throw InvalidParameter("add shape mismatch: " + a->value.shape_str() + " vs " +
                               b->value.shape_str());
    Tensor y = a->value;
    for (int64_t i = 0; i < y.size(); ++i) y[i] += b->value[i];
    return make_node(std::move(y), {a, b}, [](Node& node) {
        for (const auto& p : node.parents) {
            if (!p->requires_grad) continue;
            Tensor& d = p->ensure_grad();
            for (int64_t i = 0; i < d.size(); ++i) d[i] += node.grad[i];
        }
    });
}

Var concat_channels(const Var& a, const Var& b) {
    require_4d(a, "concat_channels");
    require_4d(b, "concat_channels");
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3))
        throw InvalidParameter("concat_channels spatial/batch mismatch");
    const int64_t N = av.dim(0), Ca = av.dim(1), Cb = bv.dim(1), hw = av.dim(2) * av.dim(3);
    Tensor y({N, Ca + Cb, av.dim(2), av.dim(3)});
    for (int64_t n = 0; n < N; ++n) {
        std::copy_n(av.data() + n * Ca * hw, Ca * hw, y.data() + n * (Ca + Cb) * hw);
        std::copy_n(bv.data() + n * Cb * hw, Cb * hw, y.data() + (n * (Ca + Cb) + Ca) * hw);
    }
    return make_node(std::move(y), {a, b}, [Ca, Cb, hw](Node& node) {
        const Var& ap = node.parents[0];
        const Var& bp = node.parents[1];
        const int64_t N = node.grad.dim(0);
        if (ap->requires_grad) {
            Tensor& da = ap->ensure_grad();
            for (int64_t n = 0; n < N; ++n) {
                const double* src = node.grad.data() + n * (Ca + Cb) * hw;
                double* dst = da.data() + n * Ca * hw;
                for (int64_t i = 0; i < Ca * hw; ++i) dst[i] += src[i];
            }
        }
        if (bp->requires_grad) {
            Tensor& db = bp->ensure_grad();
            for (int64_t n = 0; n < N; ++n) {
                const double* src = node.grad.data() + (n * (Ca + Cb) + Ca) * hw;
                double* dst = db.data() + n * Cb * hw;
                for (int64_t i = 0; i < Cb * hw; ++i) dst[i] += src[i];
            }
        }
    });
}

Var max_pool2x2(const Var& x) {
    require_4d(x, "max_pool2x2");
    const Tensor& xv = x->value;
    const int64_t N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    if (H % 2 != 0 || W % 2 != 0) throw InvalidParameter("max_pool2x2 requires even dims");
    const int64_t oh = H / 2, ow = W / 2;
    Tensor y({N, C, oh, ow});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(y.size()));
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t yo = 0; yo < oh; ++yo)
                for (int64_t xo = 0; xo < ow; ++xo) {
                    int64_t best = ((n * C + c) * H + 2 * yo) * W + 2 * xo;
                    for (int64_t dy = 0; dy < 2; ++dy)
                        for (int64_t dx = 0; dx < 2; ++dx) {
                            const int64_t idx = ((n * C + c) * H + 2 * yo + dy) * W + 2 * xo + dx;
                            if (xv[idx] > xv[best]) best = idx;
                        }
                    const int64_t oidx = ((n * C + c) * oh + yo) * ow + xo;
                    y[oidx] = xv[best];
                    (*argmax)[static_cast<size_t>(oidx)] = best;
                }
    return make_node(std::move(y), {x}, [argmax](Node& node) {
        const Var& xp = node.parents[0];
        if (!xp->requires_grad) return;
        Tensor& dx = xp->ensure_grad();
        for (int64_t i = 0; i < node.grad.size(); ++i)
            dx[(*argmax)[static_cast<size_t>(i)]] += node.grad[i];
    });
}

Var mse(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value))
        throw InvalidParameter("mse shape mismatch: " + a->value.shape_str() + " vs " +
                               b->value.shape_str());
    const int64_t n = a->value.size();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = a->value[i] - b->value[i];
        acc += d * d;
    }
    Tensor y({1});
    y[0] = acc / static_cast<double>(n);
    return make_node(std::move(y), {a, b}, [n](Node& node) {
        const Var& ap = node.parents[0];
        const Var& bp = node.parents[1];
        const double s = 2.0 * node.grad[0] / static_cast<double>(n);
        if (ap->requires_grad) {
            Tensor& da = ap->ensure_grad();
            for (int64_t i = 0; i < n; ++i) da[i] += s * (ap->value[i] - bp->value[i]);
        }
        if (bp->requires_grad) {
            Tensor& db = bp->ensure_grad();
            for (int64_t i = 0; i < n; ++i) db[i] -= s * (ap->value[i] - bp->value[i]);
        }
    });
}

}  // namespace jsr::ops
