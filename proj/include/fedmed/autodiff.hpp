#ifndef FEDMED_AUTODIFF_HPP
#define FEDMED_AUTODIFF_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "fedmed/tensor.hpp"

// Reverse-mode tape over NCHW tensors. Graphs are built per step and released
// with their root; parameters are long-lived leaf nodes whose grads are
// zeroed explicitly between steps. Convolutions run as im2col + GEMM; the
// per-sample loops are OpenMP-parallel with per-sample buffers so gradient
// reductions happen in a fixed order regardless of thread count.

namespace fedmed::ad {

template <class T>
struct Var;

template <class T>
using VarPtr = std::shared_ptr<Var<T>>;

inline std::uint64_t next_var_id() {
    static std::atomic<std::uint64_t> counter{0};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

/// Thread-local switch: while disabled, new nodes record no backward closures.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
};

template <class T>
struct Var {
    Tensor<T> val;
    Tensor<T> grad; // allocated on first contribution
    bool requires_grad = false;
    std::uint64_t id = next_var_id();
    std::vector<VarPtr<T>> parents;
    std::function<void(Var<T>&)> backprop;

    explicit Var(Tensor<T> v) : val(std::move(v)) {}

    void ensure_grad() {
        if (grad.size() != val.size()) grad = Tensor<T>(val.n, val.c, val.h, val.w, T(0));
    }
    void zero_grad() {
        if (grad.size() == val.size()) grad.fill(T(0));
    }
};

template <class T>
VarPtr<T> constant(Tensor<T> v) {
    return std::make_shared<Var<T>>(std::move(v));
}

template <class T>
VarPtr<T> param(Tensor<T> v) {
    auto p = std::make_shared<Var<T>>(std::move(v));
    p->requires_grad = true;
    p->ensure_grad();
    return p;
}

namespace detail {

template <class T>
VarPtr<T> make_node(Tensor<T> val, std::vector<VarPtr<T>> parents,
                    std::function<void(Var<T>&)> backprop) {
    auto node = std::make_shared<Var<T>>(std::move(val));
    if (grad_mode()) {
        for (const auto& p : parents)
            if (p->requires_grad) node->requires_grad = true;
        if (node->requires_grad) {
            node->parents = std::move(parents);
            node->backprop = std::move(backprop);
        }
    }
    return node;
}

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// cols is (Ci*kh*kw) x (Ho*Wo), row-major.
template <class T>
void im2col(const T* x, int ci, int hi, int wi, int kh, int kw, int stride, int pad, int ho,
            int wo, T* cols) {
    for (int c = 0; c < ci; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                T* row = cols + (static_cast<std::size_t>(c) * kh * kw + i * kw + j) *
                                    (static_cast<std::size_t>(ho) * wo);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + i;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + j;
                        row[oy * wo + ox] =
                            (iy >= 0 && iy < hi && ix >= 0 && ix < wi)
                                ? x[(static_cast<std::size_t>(c) * hi + iy) * wi + ix]
                                : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* cols, int ci, int hi, int wi, int kh, int kw, int stride, int pad,
                int ho, int wo, T* gx) {
    for (int c = 0; c < ci; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const T* row = cols + (static_cast<std::size_t>(c) * kh * kw + i * kw + j) *
                                          (static_cast<std::size_t>(ho) * wo);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + i;
                    if (iy < 0 || iy >= hi) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + j;
                        if (ix < 0 || ix >= wi) continue;
                        gx[(static_cast<std::size_t>(c) * hi + iy) * wi + ix] += row[oy * wo + ox];
                    }
                }
            }
        }
    }
}

} // namespace detail

/// 2D convolution. x: [N,Ci,H,W], w: [Co,Ci,kh,kw], b: [Co] as (Co,1,1,1).
template <class T>
VarPtr<T> conv2d(const VarPtr<T>& x, const VarPtr<T>& w, const VarPtr<T>& b, int stride,
                 int pad) {
    const auto& xv = x->val;
    const auto& wv = w->val;
    if (wv.c != xv.c)
        throw std::invalid_argument("conv2d: channel mismatch " + xv.shape_str() + " vs " +
                                    wv.shape_str());
    const int N = xv.n, Ci = xv.c, H = xv.h, W = xv.w;
    const int Co = wv.n, kh = wv.h, kw = wv.w;
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d: empty output");
    const std::size_t K = static_cast<std::size_t>(Ci) * kh * kw;
    const std::size_t M = static_cast<std::size_t>(Ho) * Wo;

    Tensor<T> y(N, Co, Ho, Wo);
    {
        detail::CMatMap<T> wm(wv.data.data(), Co, static_cast<Eigen::Index>(K));
#pragma omp parallel for schedule(static)
        for (int n = 0; n < N; ++n) {
            std::vector<T> cols(K * M);
            detail::im2col(xv.sample_ptr(n), Ci, H, W, kh, kw, stride, pad, Ho, Wo, cols.data());
            detail::CMatMap<T> cm(cols.data(), static_cast<Eigen::Index>(K),
                                  static_cast<Eigen::Index>(M));
            detail::MatMap<T> ym(y.sample_ptr(n), Co, static_cast<Eigen::Index>(M));
            ym.noalias() = wm * cm;
            for (int co = 0; co < Co; ++co) ym.row(co).array() += b->val.data[co];
        }
    }

    return detail::make_node<T>(
        std::move(y), {x, w, b}, [x, w, b, stride, pad, N, Ci, H, W, Co, kh, kw, Ho, Wo, K,
                                  M](Var<T>& self) {
            const auto& gy = self.grad;
            const bool need_gx = x->requires_grad;
            if (w->requires_grad || b->requires_grad) {
                w->ensure_grad();
                b->ensure_grad();
                // Per-sample partials, reduced in sample order for determinism.
                std::vector<std::vector<T>> dw_part(N);
                std::vector<std::vector<T>> db_part(N);
#pragma omp parallel for schedule(static)
                for (int n = 0; n < N; ++n) {
                    std::vector<T> cols(K * M);
                    detail::im2col(x->val.sample_ptr(n), Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                                   cols.data());
                    detail::CMatMap<T> cm(cols.data(), static_cast<Eigen::Index>(K),
                                          static_cast<Eigen::Index>(M));
                    detail::CMatMap<T> gym(gy.sample_ptr(n), Co, static_cast<Eigen::Index>(M));
                    dw_part[n].resize(static_cast<std::size_t>(Co) * K);
                    detail::MatMap<T> dwm(dw_part[n].data(), Co, static_cast<Eigen::Index>(K));
                    dwm.noalias() = gym * cm.transpose();
                    db_part[n].resize(Co);
                    for (int co = 0; co < Co; ++co) db_part[n][co] = gym.row(co).sum();
                }
                for (int n = 0; n < N; ++n) {
                    for (std::size_t i = 0; i < dw_part[n].size(); ++i)
                        w->grad.data[i] += dw_part[n][i];
                    for (int co = 0; co < Co; ++co) b->grad.data[co] += db_part[n][co];
                }
            }
            if (need_gx) {
                x->ensure_grad();
                detail::CMatMap<T> wm(w->val.data.data(), Co, static_cast<Eigen::Index>(K));
#pragma omp parallel for schedule(static)
                for (int n = 0; n < N; ++n) {
                    detail::CMatMap<T> gym(gy.sample_ptr(n), Co, static_cast<Eigen::Index>(M));
                    detail::Mat<T> dcols = wm.transpose() * gym; // K x M
                    detail::col2im_add(dcols.data(), Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                                       x->grad.sample_ptr(n));
                }
            }
        });
}

/// Fully connected layer. x: [N,K,1,1], w: [M,K,1,1], b: [M] -> [N,M,1,1].
template <class T>
VarPtr<T> linear(const VarPtr<T>& x, const VarPtr<T>& w, const VarPtr<T>& b) {
    const int N = x->val.n, K = x->val.c, M = w->val.n;
    if (w->val.c != K)
        throw std::invalid_argument("linear: expected input dim " + std::to_string(w->val.c) +
                                    ", got " + std::to_string(K));
    Tensor<T> y(N, M, 1, 1);
    detail::CMatMap<T> xm(x->val.data.data(), N, K);
    detail::CMatMap<T> wm(w->val.data.data(), M, K);
    detail::MatMap<T> ym(y.data.data(), N, M);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < N; ++i) ym.row(i) += detail::CMatMap<T>(b->val.data.data(), 1, M);

    return detail::make_node<T>(std::move(y), {x, w, b}, [x, w, b, N, K, M](Var<T>& self) {
        detail::CMatMap<T> gym(self.grad.data.data(), N, M);
        if (w->requires_grad) {
            w->ensure_grad();
            detail::CMatMap<T> xm(x->val.data.data(), N, K);
            detail::MatMap<T> gwm(w->grad.data.data(), M, K);
            gwm.noalias() += gym.transpose() * xm;
        }
        if (b->requires_grad) {
            b->ensure_grad();
            detail::MatMap<T> gbm(b->grad.data.data(), 1, M);
            gbm += gym.colwise().sum();
        }
        if (x->requires_grad) {
            x->ensure_grad();
            detail::CMatMap<T> wm(w->val.data.data(), M, K);
            detail::MatMap<T> gxm(x->grad.data.data(), N, K);
            gxm.noalias() += gym * wm;
        }
    });
}

template <class T>
VarPtr<T> leaky_relu(const VarPtr<T>& x, T slope) {
    Tensor<T> y = x->val;
    for (auto& v : y.data) v = v > T(0) ? v : slope * v;
    return detail::make_node<T>(std::move(y), {x}, [x, slope](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            x->grad.data[i] += self.grad.data[i] * (x->val.data[i] > T(0) ? T(1) : slope);
    });
}

template <class T>
VarPtr<T> tanh_op(const VarPtr<T>& x) {
    Tensor<T> y = x->val;
    for (auto& v : y.data) v = std::tanh(v);
    return detail::make_node<T>(std::move(y), {x}, [x](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T t = self.val.data[i];
            x->grad.data[i] += self.grad.data[i] * (T(1) - t * t);
        }
    });
}

template <class T>
VarPtr<T> sigmoid(const VarPtr<T>& x) {
    Tensor<T> y = x->val;
    for (auto& v : y.data) v = T(1) / (T(1) + std::exp(-v));
    return detail::make_node<T>(std::move(y), {x}, [x](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T s = self.val.data[i];
            x->grad.data[i] += self.grad.data[i] * s * (T(1) - s);
        }
    });
}

/// Nearest-neighbor 2x upsampling.
template <class T>
VarPtr<T> upsample2x(const VarPtr<T>& x) {
    const int N = x->val.n, C = x->val.c, H = x->val.h, W = x->val.w;
    Tensor<T> y(N, C, 2 * H, 2 * W);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const T v = x->val.at(n, c, i, j);
                    y.at(n, c, 2 * i, 2 * j) = v;
                    y.at(n, c, 2 * i, 2 * j + 1) = v;
                    y.at(n, c, 2 * i + 1, 2 * j) = v;
                    y.at(n, c, 2 * i + 1, 2 * j + 1) = v;
                }
    return detail::make_node<T>(std::move(y), {x}, [x, N, C, H, W](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < H; ++i)
                    for (int j = 0; j < W; ++j)
                        x->grad.at(n, c, i, j) +=
                            self.grad.at(n, c, 2 * i, 2 * j) + self.grad.at(n, c, 2 * i, 2 * j + 1) +
                            self.grad.at(n, c, 2 * i + 1, 2 * j) +
                            self.grad.at(n, c, 2 * i + 1, 2 * j + 1);
    });
}

/// Channel concatenation of two same-spatial-size tensors.
template <class T>
VarPtr<T> concat_ch(const VarPtr<T>& a, const VarPtr<T>& b) {
    const auto& av = a->val;
    const auto& bv = b->val;
    if (av.n != bv.n || av.h != bv.h || av.w != bv.w)
        throw std::invalid_argument("concat_ch: shape mismatch " + av.shape_str() + " vs " +
                                    bv.shape_str());
    Tensor<T> y(av.n, av.c + bv.c, av.h, av.w);
    const std::size_t plane = static_cast<std::size_t>(av.h) * av.w;
    for (int n = 0; n < av.n; ++n) {
        std::copy_n(av.sample_ptr(n), av.c * plane, y.sample_ptr(n));
        std::copy_n(bv.sample_ptr(n), bv.c * plane, y.sample_ptr(n) + av.c * plane);
    }
    return detail::make_node<T>(std::move(y), {a, b}, [a, b, plane](Var<T>& self) {
        const int ca = a->val.c, cb = b->val.c;
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (int n = 0; n < a->val.n; ++n) {
            const T* g = self.grad.sample_ptr(n);
            if (a->requires_grad)
                for (std::size_t i = 0; i < ca * plane; ++i) a->grad.sample_ptr(n)[i] += g[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < cb * plane; ++i)
                    b->grad.sample_ptr(n)[i] += g[ca * plane + i];
        }
    });
}

/// Global average pooling over the spatial extent: [N,C,H,W] -> [N,C,1,1].
template <class T>
VarPtr<T> global_avg_pool(const VarPtr<T>& x) {
    const int N = x->val.n, C = x->val.c;
    const std::size_t plane = static_cast<std::size_t>(x->val.h) * x->val.w;
    Tensor<T> y(N, C, 1, 1);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* p = x->val.sample_ptr(n) + c * plane;
            T s = T(0);
            for (std::size_t i = 0; i < plane; ++i) s += p[i];
            y.at(n, c, 0, 0) = s / static_cast<T>(plane);
        }
    return detail::make_node<T>(std::move(y), {x}, [x, plane](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const T inv = T(1) / static_cast<T>(plane);
        for (int n = 0; n < x->val.n; ++n)
            for (int c = 0; c < x->val.c; ++c) {
                const T g = self.grad.at(n, c, 0, 0) * inv;
                T* gp = x->grad.sample_ptr(n) + c * plane;
                for (std::size_t i = 0; i < plane; ++i) gp[i] += g;
            }
    });
}

template <class T>
VarPtr<T> add(const VarPtr<T>& a, const VarPtr<T>& b) {
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument("add: shape mismatch " + a->val.shape_str() + " vs " +
                                    b->val.shape_str());
    Tensor<T> y = a->val;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += b->val.data[i];
    return detail::make_node<T>(std::move(y), {a, b}, [a, b](Var<T>& self) {
        for (const auto& p : {a, b}) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                p->grad.data[i] += self.grad.data[i];
        }
    });
}

template <class T>
VarPtr<T> sub(const VarPtr<T>& a, const VarPtr<T>& b) {
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument("sub: shape mismatch " + a->val.shape_str() + " vs " +
                                    b->val.shape_str());
    Tensor<T> y = a->val;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] -= b->val.data[i];
    return detail::make_node<T>(std::move(y), {a, b}, [a, b](Var<T>& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                a->grad.data[i] += self.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                b->grad.data[i] -= self.grad.data[i];
        }
    });
}

template <class T>
VarPtr<T> abs_op(const VarPtr<T>& x) {
    Tensor<T> y = x->val;
    for (auto& v : y.data) v = std::abs(v);
    return detail::make_node<T>(std::move(y), {x}, [x](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            x->grad.data[i] += self.grad.data[i] * (x->val.data[i] >= T(0) ? T(1) : T(-1));
    });
}

template <class T>
VarPtr<T> scale(const VarPtr<T>& x, T s) {
    Tensor<T> y = x->val;
    for (auto& v : y.data) v *= s;
    return detail::make_node<T>(std::move(y), {x}, [x, s](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            x->grad.data[i] += self.grad.data[i] * s;
    });
}

template <class T>
VarPtr<T> one_minus(const VarPtr<T>& x) {
    Tensor<T> y = x->val;
    for (auto& v : y.data) v = T(1) - v;
    return detail::make_node<T>(std::move(y), {x}, [x](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            x->grad.data[i] -= self.grad.data[i];
    });
}

/// log(max(x, eps)); zero gradient inside the clamped region.
template <class T>
VarPtr<T> log_clamped(const VarPtr<T>& x, T eps) {
    Tensor<T> y = x->val;
    for (auto& v : y.data) v = std::log(std::max(v, eps));
    return detail::make_node<T>(std::move(y), {x}, [x, eps](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T v = x->val.data[i];
            if (v > eps) x->grad.data[i] += self.grad.data[i] / v;
        }
    });
}

/// Mean over every element -> scalar node.
template <class T>
VarPtr<T> mean_all(const VarPtr<T>& x) {
    T s = T(0);
    for (const auto& v : x->val.data) s += v;
    const T inv = T(1) / static_cast<T>(x->val.size());
    return detail::make_node<T>(Tensor<T>::scalar(s * inv), {x}, [x, inv](Var<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const T g = self.grad.data[0] * inv;
        for (auto& v : x->grad.data) v += g;
    });
}

/// Mean cross entropy of softmax(logits) against integer labels.
/// logits: [N,K,1,1]; labels.size() == N.
template <class T>
VarPtr<T> softmax_xent_mean(const VarPtr<T>& logits, std::vector<int> labels) {
    const int N = logits->val.n, K = logits->val.c;
    if (static_cast<int>(labels.size()) != N)
        throw std::invalid_argument("softmax_xent_mean: label count mismatch");
    for (int lab : labels)
        if (lab < 0 || lab >= K)
            throw std::invalid_argument("softmax_xent_mean: label " + std::to_string(lab) +
                                        " out of range [0, " + std::to_string(K - 1) + "]");
    T total = T(0);
    for (int i = 0; i < N; ++i) {
        const T* z = logits->val.data.data() + static_cast<std::size_t>(i) * K;
        T mx = z[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
        T lse = T(0);
        for (int k = 0; k < K; ++k) lse += std::exp(z[k] - mx);
        lse = mx + std::log(lse);
        total += lse - z[labels[i]];
    }
    const T inv = T(1) / static_cast<T>(N);
    return detail::make_node<T>(Tensor<T>::scalar(total * inv), {logits},
                                [logits, labels = std::move(labels), N, K, inv](Var<T>& self) {
                                    if (!logits->requires_grad) return;
                                    logits->ensure_grad();
                                    const T g = self.grad.data[0] * inv;
                                    for (int i = 0; i < N; ++i) {
                                        const T* z = logits->val.data.data() +
                                                     static_cast<std::size_t>(i) * K;
                                        T* gz = logits->grad.data.data() +
                                                static_cast<std::size_t>(i) * K;
                                        T mx = z[0];
                                        for (int k = 1; k < K; ++k) mx = std::max(mx, z[k]);
                                        T denom = T(0);
                                        for (int k = 0; k < K; ++k) denom += std::exp(z[k] - mx);
                                        for (int k = 0; k < K; ++k) {
                                            const T p = std::exp(z[k] - mx) / denom;
                                            gz[k] += g * (p - (k == labels[i] ? T(1) : T(0)));
                                        }
                                    }
                                });
}

/// Weighted sum of scalar nodes -> scalar node.
template <class T>
VarPtr<T> weighted_sum(const std::vector<std::pair<VarPtr<T>, T>>& terms) {
    if (terms.empty()) throw std::invalid_argument("weighted_sum: no terms");
    T total = T(0);
    std::vector<VarPtr<T>> parents;
    parents.reserve(terms.size());
    for (const auto& [node, wgt] : terms) {
        if (node->val.size() != 1)
            throw std::invalid_argument("weighted_sum: non-scalar term");
        total += wgt * node->val.data[0];
        parents.push_back(node);
    }
    std::vector<T> weights;
    for (const auto& t : terms) weights.push_back(t.second);
    return detail::make_node<T>(Tensor<T>::scalar(total), std::move(parents),
                                [weights](Var<T>& self) {
                                    for (std::size_t i = 0; i < self.parents.size(); ++i) {
                                        auto& p = self.parents[i];
                                        if (!p->requires_grad) continue;
                                        p->ensure_grad();
                                        p->grad.data[0] += self.grad.data[0] * weights[i];
                                    }
                                });
}

/// Cut the tape: value passes through, gradients do not.
template <class T>
VarPtr<T> detach(const VarPtr<T>& x) {
    return constant(x->val);
}

/// Backpropagate from a scalar root. Parameter grads must be zeroed by the
/// caller between steps; this accumulates into them.
template <class T>
void backward(const VarPtr<T>& root) {
    if (root->val.size() != 1)
        throw std::invalid_argument("backward: root must be scalar");
    if (!root->requires_grad) return;

    // Collect the reachable grad-requiring subgraph.
    std::vector<Var<T>*> order;
    std::unordered_set<const Var<T>*> seen;
    std::vector<VarPtr<T>> stack{root};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto node = stack.back();
        stack.pop_back();
        order.push_back(node.get());
        for (const auto& p : node->parents)
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
    }
    // Creation ids give a topological order (parents precede children).
    std::sort(order.begin(), order.end(),
              [](const Var<T>* a, const Var<T>* b) { return a->id > b->id; });

    root->ensure_grad();
    root->grad.data[0] = T(1);
    for (Var<T>* node : order) {
        if (node->backprop && node->grad.size() == node->val.size()) node->backprop(*node);
    }
}

} // namespace fedmed::ad

#endif // FEDMED_AUTODIFF_HPP
