#include "spikenas/ops.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>

namespace spikenas {

namespace {

dim_t div_floor(dim_t a, dim_t b) {
    dim_t q = a / b, r = a % b;
    return (r != 0 && r < 0) ? q - 1 : q;
}

dim_t div_ceil(dim_t a, dim_t b) { return -div_floor(-a, b); }

dim_t conv_out_dim(dim_t in, dim_t k, dim_t stride, dim_t pad, dim_t dil) {
    return (in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
}

// Output-index range [o0, o1] such that o*stride - pad + tap*dil lands in
// [0, in). Empty when o0 > o1.
struct TapRange {
    dim_t o0, o1;
};

TapRange tap_range(dim_t in, dim_t out, dim_t stride, dim_t pad, dim_t tap_off) {
    dim_t o0 = std::max<dim_t>(0, div_ceil(pad - tap_off, stride));
    dim_t o1 = std::min<dim_t>(out - 1, div_floor(in - 1 + pad - tap_off, stride));
    return {o0, o1};
}

template <class T>
const T* plane(const Tensor<T>& x, dim_t n, dim_t c, dim_t t) {
    return x.data() + x.index(n, c, 0, 0, t);
}

template <class T>
T* plane(Tensor<T>& x, dim_t n, dim_t c, dim_t t) {
    return x.data() + x.index(n, c, 0, 0, t);
}

template <class T>
T* grad_plane(Tensor<T>& x, dim_t n, dim_t c, dim_t t) {
    return x.grad_data() + x.index(n, c, 0, 0, t);
}

}  // namespace

// ---------------------------------------------------------------------
// conv2d

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Conv2dSpec& spec) {
    const Shape5 xs = x.shape();
    const Shape5 ks = kernel.shape();
    const dim_t G = spec.groups;
    check_shape(G >= 1 && xs.c % G == 0 && ks.n % G == 0,
                "conv2d: channel axes not divisible by groups: input C=" + std::to_string(xs.c) +
                    ", kernel Cout=" + std::to_string(ks.n) + ", groups=" + std::to_string(G));
    check_shape(ks.c == xs.c / G,
                "conv2d: kernel input-channel axis " + std::to_string(ks.c) +
                    " does not match input C/groups = " + std::to_string(xs.c / G));
    check_shape(ks.t == 1, "conv2d: kernel time axis must be 1, got " + std::to_string(ks.t));
    const dim_t ph = spec.pad_h_eff(), pw = spec.pad_w_eff();
    const dim_t Ho = conv_out_dim(xs.h, ks.h, spec.stride, ph, spec.dilation);
    const dim_t Wo = conv_out_dim(xs.w, ks.w, spec.stride, pw, spec.dilation);
    check_shape(Ho >= 1 && Wo >= 1,
                "conv2d: kernel " + std::to_string(ks.h) + "x" + std::to_string(ks.w) +
                    " larger than padded input H=" + std::to_string(xs.h) + " W=" + std::to_string(xs.w));

    const dim_t Co = ks.n, Cig = ks.c, Cog = Co / G;
    const bool pointwise = ks.h == 1 && ks.w == 1 && spec.stride == 1 && ph == 0 && pw == 0;
    Tensor<T> out = pointwise ? Tensor<T>::empty({xs.n, Co, Ho, Wo, xs.t})
                              : Tensor<T>::zeros({xs.n, Co, Ho, Wo, xs.t});
    const dim_t s = spec.stride, d = spec.dilation;
    const dim_t block = xs.t * xs.h * xs.w;  // contiguous (t,h,w) volume per (n,c)

    // per-tap output ranges are shared by every (n,c,t)
    std::vector<TapRange> row_range(std::size_t(ks.h)), col_range(std::size_t(ks.w));
    for (dim_t r = 0; r < ks.h; ++r) row_range[std::size_t(r)] = tap_range(xs.h, Ho, s, ph, r * d);
    for (dim_t q = 0; q < ks.w; ++q) col_range[std::size_t(q)] = tap_range(xs.w, Wo, s, pw, q * d);

    auto forward_plane = [&](const T* px, const T* kt, T* po) {
        // accumulate every kernel tap of one (input plane -> output plane) pair
        for (dim_t r = 0; r < ks.h; ++r) {
            const TapRange rh = row_range[std::size_t(r)];
            const dim_t nrows = rh.o1 - rh.o0 + 1;
            if (nrows <= 0) continue;
            for (dim_t q = 0; q < ks.w; ++q) {
                const T kv = kt[r * ks.w + q];
                if (kv == T(0)) continue;
                const TapRange rw = col_range[std::size_t(q)];
                const dim_t m = rw.o1 - rw.o0 + 1;
                if (m <= 0) continue;
                const dim_t ih0 = rh.o0 * s - ph + r * d;
                const dim_t iw0 = rw.o0 * s - pw + q * d;
                if (s == 1) {
                    kern::axpy_rows(std::size_t(nrows), std::size_t(m), kv, px + ih0 * xs.w + iw0,
                                    xs.w, po + rh.o0 * Wo + rw.o0, Wo);
                } else {
                    kern::axpy_sx_rows(std::size_t(nrows), std::size_t(m), kv,
                                       px + ih0 * xs.w + iw0, s * xs.w, s,
                                       po + rh.o0 * Wo + rw.o0, Wo);
                }
            }
        }
    };

    kern::parallel_for(xs.n, [&](dim_t nb, dim_t ne) {
        for (dim_t n = nb; n < ne; ++n)
            for (dim_t g = 0; g < G; ++g)
                for (dim_t col = 0; col < Cog; ++col) {
                    const dim_t co = g * Cog + col;
                    for (dim_t cil = 0; cil < Cig; ++cil) {
                        const dim_t ci = g * Cig + cil;
                        if (pointwise) {
                            if (cil == 0)
                                kern::scale(std::size_t(block), kernel.at(co, cil, 0, 0, 0),
                                            x.data() + x.index(n, ci, 0, 0, 0),
                                            out.data() + out.index(n, co, 0, 0, 0));
                            else
                                kern::axpy(std::size_t(block), kernel.at(co, cil, 0, 0, 0),
                                           x.data() + x.index(n, ci, 0, 0, 0),
                                           out.data() + out.index(n, co, 0, 0, 0));
                        } else {
                            const T* kt = kernel.data() + kernel.index(co, cil, 0, 0, 0);
                            for (dim_t t = 0; t < xs.t; ++t)
                                forward_plane(plane(x, n, ci, t), kt, plane(out, n, co, t));
                        }
                    }
                }
    });

    Tensor<T> xc = x, kc = kernel, oc = out;
    if (recording(out, x, kernel)) {
        Tape<T>::current()->record(out, [xc, kc, oc, xs, ks, Ho, Wo, s, ph, pw, d, G, Cig, Cog,
                                         pointwise, block, row_range, col_range]() mutable {
            const T* gout = oc.grad_vec().data();
            const dim_t oblock = oc.shape().t * oc.shape().h * oc.shape().w;
            // grad wrt input: scatter output grads through the kernel taps
            if (xc.diff()) {
                xc.grad_data();
                kern::parallel_for(xs.n, [&](dim_t nb, dim_t ne) {
                    for (dim_t n = nb; n < ne; ++n)
                        for (dim_t g = 0; g < G; ++g)
                            for (dim_t col = 0; col < Cog; ++col) {
                                const dim_t co = g * Cog + col;
                                for (dim_t cil = 0; cil < Cig; ++cil) {
                                    const dim_t ci = g * Cig + cil;
                                    if (pointwise) {
                                        kern::axpy(std::size_t(block), kc.at(co, cil, 0, 0, 0),
                                                   gout + oc.index(n, co, 0, 0, 0),
                                                   xc.grad_data() + xc.index(n, ci, 0, 0, 0));
                                        continue;
                                    }
                                    for (dim_t t = 0; t < xs.t; ++t) {
                                        const T* go = gout + oc.index(n, co, 0, 0, t);
                                        T* gx = grad_plane(xc, n, ci, t);
                                        for (dim_t r = 0; r < ks.h; ++r) {
                                            const TapRange rh = row_range[std::size_t(r)];
                                            const dim_t nrows = rh.o1 - rh.o0 + 1;
                                            if (nrows <= 0) continue;
                                            for (dim_t q = 0; q < ks.w; ++q) {
                                                const T kv = kc.at(co, cil, r, q, 0);
                                                if (kv == T(0)) continue;
                                                const TapRange rw = col_range[std::size_t(q)];
                                                const dim_t m = rw.o1 - rw.o0 + 1;
                                                if (m <= 0) continue;
                                                const dim_t ih0 = rh.o0 * s - ph + r * d;
                                                const dim_t iw0 = rw.o0 * s - pw + q * d;
                                                if (s == 1) {
                                                    kern::axpy_rows(std::size_t(nrows), std::size_t(m),
                                                                    kv, go + rh.o0 * Wo + rw.o0, Wo,
                                                                    gx + ih0 * xs.w + iw0, xs.w);
                                                } else {
                                                    kern::axpy_sy_rows(
                                                        std::size_t(nrows), std::size_t(m), kv,
                                                        go + rh.o0 * Wo + rw.o0, Wo,
                                                        gx + ih0 * xs.w + iw0, s * xs.w, s);
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                });
            }
            // grad wrt kernel
            if (kc.diff()) {
                kc.grad_data();
                kern::parallel_for(ks.n, [&](dim_t cb, dim_t ce) {
                    for (dim_t co = cb; co < ce; ++co) {
                        const dim_t g = co / Cog;
                        for (dim_t cil = 0; cil < Cig; ++cil) {
                            const dim_t ci = g * Cig + cil;
                            if (pointwise) {
                                T acc = T(0);
                                for (dim_t n = 0; n < xs.n; ++n)
                                    acc += kern::dot(std::size_t(block),
                                                     xc.data() + xc.index(n, ci, 0, 0, 0),
                                                     gout + oc.index(n, co, 0, 0, 0));
                                kc.grad_data()[kc.index(co, cil, 0, 0, 0)] += acc;
                                continue;
                            }
                            for (dim_t r = 0; r < ks.h; ++r) {
                                const TapRange rh = row_range[std::size_t(r)];
                                const dim_t nrows = rh.o1 - rh.o0 + 1;
                                if (nrows <= 0) continue;
                                for (dim_t q = 0; q < ks.w; ++q) {
                                    const TapRange rw = col_range[std::size_t(q)];
                                    const dim_t m = rw.o1 - rw.o0 + 1;
                                    if (m <= 0) continue;
                                    const dim_t ih0 = rh.o0 * s - ph + r * d;
                                    const dim_t iw0 = rw.o0 * s - pw + q * d;
                                    T acc = T(0);
                                    for (dim_t n = 0; n < xs.n; ++n)
                                        for (dim_t t = 0; t < xs.t; ++t) {
                                            const T* px = plane(xc, n, ci, t);
                                            const T* go = gout + oc.index(n, co, 0, 0, t);
                                            if (s == 1) {
                                                acc += kern::dot_rows(std::size_t(nrows),
                                                                      std::size_t(m),
                                                                      px + ih0 * xs.w + iw0, xs.w,
                                                                      go + rh.o0 * Wo + rw.o0, Wo);
                                            } else {
                                                acc += kern::dot_sx_rows(
                                                    std::size_t(nrows), std::size_t(m),
                                                    px + ih0 * xs.w + iw0, s * xs.w, s,
                                                    go + rh.o0 * Wo + rw.o0, Wo);
                                            }
                                        }
                                    kc.grad_data()[kc.index(co, cil, r, q, 0)] += acc;
                                }
                            }
                        }
                    }
                });
            }
            (void)oblock;
        });
    }
    return out;
}

// ---------------------------------------------------------------------
// pool2d

template <class T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, dim_t window, dim_t stride, dim_t padding) {
    const Shape5 xs = x.shape();
    check_shape(window >= 1, "pool2d: window must be >= 1");
    check_shape(window <= xs.h + 2 * padding && window <= xs.w + 2 * padding,
                "pool2d: window " + std::to_string(window) + " larger than padded input H=" +
                    std::to_string(xs.h) + " W=" + std::to_string(xs.w) + " pad=" + std::to_string(padding));
    const dim_t Ho = (xs.h + 2 * padding - window) / stride + 1;
    const dim_t Wo = (xs.w + 2 * padding - window) / stride + 1;
    Tensor<T> out = Tensor<T>::zeros({xs.n, xs.c, Ho, Wo, xs.t});
    const dim_t planes = xs.n * xs.c * xs.t;
    const T inv = T(1) / T(window * window);

    std::vector<TapRange> row_range(static_cast<std::size_t>(window));
    std::vector<TapRange> col_range(static_cast<std::size_t>(window));
    for (dim_t r = 0; r < window; ++r) row_range[std::size_t(r)] = tap_range(xs.h, Ho, stride, padding, r);
    for (dim_t q = 0; q < window; ++q) col_range[std::size_t(q)] = tap_range(xs.w, Wo, stride, padding, q);

    kern::parallel_for(planes, [&](dim_t pb, dim_t pe) {
        for (dim_t pl = pb; pl < pe; ++pl) {
            const dim_t n = pl / (xs.c * xs.t);
            const dim_t c = (pl / xs.t) % xs.c;
            const dim_t t = pl % xs.t;
            const T* px = plane(x, n, c, t);
            T* po = plane(out, n, c, t);
            if (kind == PoolKind::avg) {
                for (dim_t r = 0; r < window; ++r) {
                    const TapRange rh = row_range[std::size_t(r)];
                    const dim_t nrows = rh.o1 - rh.o0 + 1;
                    if (nrows <= 0) continue;
                    for (dim_t q = 0; q < window; ++q) {
                        const TapRange rw = col_range[std::size_t(q)];
                        const dim_t m = rw.o1 - rw.o0 + 1;
                        if (m <= 0) continue;
                        const dim_t ih0 = rh.o0 * stride - padding + r;
                        const dim_t iw0 = rw.o0 * stride - padding + q;
                        if (stride == 1)
                            kern::axpy_rows(std::size_t(nrows), std::size_t(m), inv,
                                            px + ih0 * xs.w + iw0, xs.w, po + rh.o0 * Wo + rw.o0,
                                            Wo);
                        else
                            kern::axpy_sx_rows(std::size_t(nrows), std::size_t(m), inv,
                                               px + ih0 * xs.w + iw0, stride * xs.w, stride,
                                               po + rh.o0 * Wo + rw.o0, Wo);
                    }
                }
            } else if (window == 3 && padding < window) {
                kern::pool3_max(xs.h, xs.w, Ho, Wo, stride, padding, px, po);
            } else {
                for (dim_t oh = 0; oh < Ho; ++oh)
                    for (dim_t ow = 0; ow < Wo; ++ow) {
                        T best = -std::numeric_limits<T>::infinity();
                        bool any = false;
                        for (dim_t r = 0; r < window; ++r) {
                            const dim_t ih = oh * stride - padding + r;
                            if (ih < 0 || ih >= xs.h) continue;
                            for (dim_t q = 0; q < window; ++q) {
                                const dim_t iw = ow * stride - padding + q;
                                if (iw < 0 || iw >= xs.w) continue;
                                any = true;
                                const T v = px[ih * xs.w + iw];
                                if (v > best) best = v;
                            }
                        }
                        check_shape(any, "pool2d: window entirely inside padding");
                        po[oh * Wo + ow] = best;
                    }
            }
        }
    });

    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc, row_range, col_range, kind, window, stride,
                                         padding, planes, Ho, Wo, inv]() mutable {
            if (!xc.diff()) return;
            xc.grad_data();
            const Shape5 xs2 = xc.shape();
            kern::parallel_for(planes, [&](dim_t pb, dim_t pe) {
                for (dim_t pl = pb; pl < pe; ++pl) {
                    const dim_t n = pl / (xs2.c * xs2.t);
                    const dim_t c = (pl / xs2.t) % xs2.c;
                    const dim_t t = pl % xs2.t;
                    const T* go = oc.grad_vec().data() + oc.index(n, c, 0, 0, t);
                    T* gx = grad_plane(xc, n, c, t);
                    if (kind == PoolKind::avg) {
                        for (dim_t r = 0; r < window; ++r) {
                            const TapRange rh = row_range[std::size_t(r)];
                            const dim_t nrows = rh.o1 - rh.o0 + 1;
                            if (nrows <= 0) continue;
                            for (dim_t q = 0; q < window; ++q) {
                                const TapRange rw = col_range[std::size_t(q)];
                                const dim_t m = rw.o1 - rw.o0 + 1;
                                if (m <= 0) continue;
                                const dim_t ih0 = rh.o0 * stride - padding + r;
                                const dim_t iw0 = rw.o0 * stride - padding + q;
                                if (stride == 1)
                                    kern::axpy_rows(std::size_t(nrows), std::size_t(m), inv,
                                                    go + rh.o0 * Wo + rw.o0, Wo,
                                                    gx + ih0 * xs2.w + iw0, xs2.w);
                                else
                                    kern::axpy_sy_rows(std::size_t(nrows), std::size_t(m), inv,
                                                       go + rh.o0 * Wo + rw.o0, Wo,
                                                       gx + ih0 * xs2.w + iw0, stride * xs2.w,
                                                       stride);
                            }
                        }
                    } else {
                        // route to the first window element matching the saved
                        // max (first occurrence in scan order)
                        const T* px = plane(xc, n, c, t);
                        const T* po = oc.data() + oc.index(n, c, 0, 0, t);
                        for (dim_t oh = 0; oh < Ho; ++oh)
                            for (dim_t ow = 0; ow < Wo; ++ow) {
                                const T g = go[oh * Wo + ow];
                                if (g == T(0)) continue;
                                const T best = po[oh * Wo + ow];
                                bool routed = false;
                                for (dim_t r = 0; r < window && !routed; ++r) {
                                    const dim_t ih = oh * stride - padding + r;
                                    if (ih < 0 || ih >= xs2.h) continue;
                                    for (dim_t q = 0; q < window; ++q) {
                                        const dim_t iw = ow * stride - padding + q;
                                        if (iw < 0 || iw >= xs2.w) continue;
                                        if (px[ih * xs2.w + iw] == best) {
                                            gx[ih * xs2.w + iw] += g;
                                            routed = true;
                                            break;
                                        }
                                    }
                                }
                            }
                    }
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------------
// reduce_pool

template <class T>
Tensor<T> reduce_pool(const Tensor<T>& x, AxisSet axes, PoolKind kind) {
    check_shape(axes.c || axes.h || axes.w || axes.t, "reduce_pool: empty axis set");
    const Shape5 xs = x.shape();
    Shape5 os = xs;
    if (axes.c) os.c = 1;
    if (axes.h) os.h = 1;
    if (axes.w) os.w = 1;
    if (axes.t) os.t = 1;
    Tensor<T> out = Tensor<T>::zeros(os);
    const dim_t count = (axes.c ? xs.c : 1) * (axes.h ? xs.h : 1) * (axes.w ? xs.w : 1) *
                        (axes.t ? xs.t : 1);

    Tensor<T> xc = x, oc = out;
    bool rec = recording(out, x);
    std::shared_ptr<std::vector<std::int64_t>> argmax;
    if (kind == PoolKind::max && rec)
        argmax = std::make_shared<std::vector<std::int64_t>>(std::size_t(out.numel()), -1);

    if (kind == PoolKind::avg) {
        const T inv = T(1) / T(count);
        for (dim_t n = 0; n < xs.n; ++n)
            for (dim_t c = 0; c < xs.c; ++c)
                for (dim_t t = 0; t < xs.t; ++t) {
                    if (axes.h && axes.w) {
                        const T s = kern::sum(std::size_t(xs.h * xs.w), plane(x, n, c, t));
                        out.at(n, axes.c ? 0 : c, 0, 0, axes.t ? 0 : t) += s * inv;
                    } else {
                        for (dim_t h = 0; h < xs.h; ++h)
                            for (dim_t w = 0; w < xs.w; ++w)
                                out.at(n, axes.c ? 0 : c, axes.h ? 0 : h, axes.w ? 0 : w,
                                       axes.t ? 0 : t) += x.at(n, c, h, w, t) * inv;
                    }
                }
    } else {
        kern::fill(out.size(), -std::numeric_limits<T>::infinity(), out.data());
        for (dim_t n = 0; n < xs.n; ++n)
            for (dim_t c = 0; c < xs.c; ++c)
                for (dim_t t = 0; t < xs.t; ++t)
                    for (dim_t h = 0; h < xs.h; ++h)
                        for (dim_t w = 0; w < xs.w; ++w) {
                            const dim_t oi = out.index(n, axes.c ? 0 : c, axes.h ? 0 : h,
                                                       axes.w ? 0 : w, axes.t ? 0 : t);
                            const T v = x.at(n, c, h, w, t);
                            if (v > out.data()[oi]) {
                                out.data()[oi] = v;
                                if (argmax) (*argmax)[std::size_t(oi)] = x.index(n, c, h, w, t);
                            }
                        }
    }

    if (rec) {
        Tape<T>::current()->record(out, [xc, oc, argmax, axes, kind, count]() mutable {
            if (!xc.diff()) return;
            const Shape5 xs2 = xc.shape();
            T* gx = xc.grad_data();
            const T* go = oc.grad_vec().data();
            if (kind == PoolKind::max) {
                for (std::size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += go[i];
                return;
            }
            const T inv = T(1) / T(count);
            for (dim_t n = 0; n < xs2.n; ++n)
                for (dim_t c = 0; c < xs2.c; ++c)
                    for (dim_t t = 0; t < xs2.t; ++t) {
                        const dim_t base = oc.index(n, axes.c ? 0 : c, 0, 0, axes.t ? 0 : t);
                        if (axes.h && axes.w) {
                            kern::adds(std::size_t(xs2.h * xs2.w), go[base] * inv,
                                       grad_plane(xc, n, c, t));
                        } else {
                            for (dim_t h = 0; h < xs2.h; ++h)
                                for (dim_t w = 0; w < xs2.w; ++w)
                                    gx[xc.index(n, c, h, w, t)] +=
                                        go[oc.index(n, axes.c ? 0 : c, axes.h ? 0 : h,
                                                    axes.w ? 0 : w, axes.t ? 0 : t)] *
                                        inv;
                        }
                    }
        });
    }
    return out;
}

// ---------------------------------------------------------------------
// linear

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    const Shape5 xs = x.shape();
    const Shape5 ws = weight.shape();
    const dim_t F = xs.c * xs.h * xs.w * xs.t;
    check_shape(ws.c == F, "linear: input features " + std::to_string(F) +
                               " do not match weight inner dimension " + std::to_string(ws.c));
    if (bias.defined())
        check_shape(bias.shape().c == ws.n, "linear: bias length " + std::to_string(bias.shape().c) +
                                                " does not match output dimension " + std::to_string(ws.n));
    const dim_t Fo = ws.n;
    Tensor<T> out = Tensor<T>::zeros({xs.n, Fo, 1, 1, 1});
    kern::parallel_for(xs.n, [&](dim_t nb, dim_t ne) {
        for (dim_t n = nb; n < ne; ++n) {
            const T* xn = x.data() + n * F;
            T* on = out.data() + n * Fo;
            for (dim_t j = 0; j < Fo; ++j) {
                T v = kern::dot(std::size_t(F), xn, weight.data() + j * F);
                if (bias.defined()) v += bias.data()[j];
                on[j] = v;
            }
        }
    });

    Tensor<T> xc = x, wc = weight, bc = bias, oc = out;
    if (recording(out, x, weight, bias.defined() ? bias : Tensor<T>())) {
        Tape<T>::current()->record(out, [xc, wc, bc, oc, F, Fo]() mutable {
            const Shape5 xs2 = xc.shape();
            const T* go = oc.grad_vec().data();
            if (xc.diff()) {
                xc.grad_data();
                kern::parallel_for(xs2.n, [&](dim_t nb, dim_t ne) {
                    for (dim_t n = nb; n < ne; ++n)
                        for (dim_t j = 0; j < Fo; ++j)
                            kern::axpy(std::size_t(F), go[n * Fo + j], wc.data() + j * F,
                                       xc.grad_data() + n * F);
                });
            }
            if (wc.diff()) {
                wc.grad_data();
                kern::parallel_for(Fo, [&](dim_t jb, dim_t je) {
                    for (dim_t j = jb; j < je; ++j)
                        for (dim_t n = 0; n < xs2.n; ++n)
                            kern::axpy(std::size_t(F), go[n * Fo + j], xc.data() + n * F,
                                       wc.grad_data() + j * F);
                });
            }
            if (bc.defined() && bc.diff()) {
                T* gb = bc.grad_data();
                for (dim_t n = 0; n < xs2.n; ++n)
                    for (dim_t j = 0; j < Fo; ++j) gb[j] += go[n * Fo + j];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------
// pointwise

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::empty(x.shape());
    kern::sigmoid(x.size(), x.data(), out.data());
    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc]() mutable {
            if (!xc.diff()) return;
            T* gx = xc.grad_data();
            const T* go = oc.grad_vec().data();
            const T* s = oc.data();
            for (std::size_t i = 0; i < oc.size(); ++i) gx[i] += go[i] * s[i] * (T(1) - s[i]);
        });
    }
    return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::empty(x.shape());
    kern::relu(x.size(), x.data(), out.data());
    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc]() mutable {
            if (!xc.diff()) return;
            T* gx = xc.grad_data();
            const T* go = oc.grad_vec().data();
            const T* xv = xc.data();
            for (std::size_t i = 0; i < oc.size(); ++i)
                if (xv[i] > T(0)) gx[i] += go[i];
        });
    }
    return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_shape(a.shape() == b.shape(),
                "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor<T> out = Tensor<T>::empty(a.shape());
    kern::add(a.size(), a.data(), b.data(), out.data());
    Tensor<T> ac = a, bc = b, oc = out;
    if (recording(out, a, b)) {
        Tape<T>::current()->record(out, [ac, bc, oc]() mutable {
            const T* go = oc.grad_vec().data();
            if (ac.diff()) ac.accumulate_grad(go);
            if (bc.diff()) bc.accumulate_grad(go);
        });
    }
    return out;
}

namespace {

void broadcast_shapes(const Shape5& a, const Shape5& b, Shape5& out) {
    auto merge = [](dim_t x, dim_t y, const char* axis) {
        check_shape(x == y || x == 1 || y == 1,
                    std::string("mul: axis ") + axis + " not broadcastable: " + std::to_string(x) +
                        " vs " + std::to_string(y));
        return std::max(x, y);
    };
    out.n = merge(a.n, b.n, "N");
    out.c = merge(a.c, b.c, "C");
    out.h = merge(a.h, b.h, "H");
    out.w = merge(a.w, b.w, "W");
    out.t = merge(a.t, b.t, "T");
}

// Memory strides in (n,c,t,h,w) nesting, zeroed on broadcast axes.
struct BStrides {
    dim_t n, c, t, h, w;
};

BStrides bstrides(const Shape5& s, const Shape5& out) {
    BStrides r{};
    dim_t sw = 1, sh = s.w, st = s.h * s.w, sc = s.t * s.h * s.w, sn = s.c * s.t * s.h * s.w;
    r.w = (s.w == out.w) ? sw : 0;
    r.h = (s.h == out.h) ? sh : 0;
    r.t = (s.t == out.t) ? st : 0;
    r.c = (s.c == out.c) ? sc : 0;
    r.n = (s.n == out.n) ? sn : 0;
    return r;
}

}  // namespace

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    Shape5 os;
    broadcast_shapes(a.shape(), b.shape(), os);
    Tensor<T> out = Tensor<T>::zeros(os);

    const bool same = a.shape() == b.shape();
    if (same) {
        kern::mul(a.size(), a.data(), b.data(), out.data());
    } else {
        const BStrides sa = bstrides(a.shape(), os), sb = bstrides(b.shape(), os);
        dim_t oi = 0;
        for (dim_t n = 0; n < os.n; ++n)
            for (dim_t c = 0; c < os.c; ++c)
                for (dim_t t = 0; t < os.t; ++t) {
                    const dim_t abase = n * sa.n + c * sa.c + t * sa.t;
                    const dim_t bbase = n * sb.n + c * sb.c + t * sb.t;
                    if (sa.h && sa.w && sb.h == 0 && sb.w == 0) {
                        // per-plane scale by a single weight (channel-temporal attention)
                        kern::scale(std::size_t(os.h * os.w), b.data()[bbase], a.data() + abase,
                                    out.data() + oi);
                        oi += os.h * os.w;
                    } else if (sa.h && sa.w && sb.h && sb.w) {
                        kern::mul(std::size_t(os.h * os.w), a.data() + abase, b.data() + bbase,
                                  out.data() + oi);
                        oi += os.h * os.w;
                    } else {
                        for (dim_t h = 0; h < os.h; ++h)
                            for (dim_t w = 0; w < os.w; ++w)
                                out.data()[oi++] = a.data()[abase + h * sa.h + w * sa.w] *
                                                   b.data()[bbase + h * sb.h + w * sb.w];
                    }
                }
    }

    Tensor<T> ac = a, bc = b, oc = out;
    if (recording(out, a, b)) {
        Tape<T>::current()->record(out, [ac, bc, oc, os, same]() mutable {
            const T* go = oc.grad_vec().data();
            if (same) {
                if (ac.diff()) kern::macc(oc.size(), go, bc.data(), ac.grad_data());
                if (bc.diff()) kern::macc(oc.size(), go, ac.data(), bc.grad_data());
                return;
            }
            const BStrides sa = bstrides(ac.shape(), os), sb = bstrides(bc.shape(), os);
            T* ga = ac.diff() ? ac.grad_data() : nullptr;
            T* gb = bc.diff() ? bc.grad_data() : nullptr;
            dim_t oi = 0;
            for (dim_t n = 0; n < os.n; ++n)
                for (dim_t c = 0; c < os.c; ++c)
                    for (dim_t t = 0; t < os.t; ++t) {
                        const dim_t abase = n * sa.n + c * sa.c + t * sa.t;
                        const dim_t bbase = n * sb.n + c * sb.c + t * sb.t;
                        if (sa.h && sa.w && sb.h == 0 && sb.w == 0) {
                            const std::size_t m = std::size_t(os.h * os.w);
                            if (ga) kern::axpy(m, bc.data()[bbase], go + oi, ga + abase);
                            if (gb) gb[bbase] += kern::dot(m, go + oi, ac.data() + abase);
                            oi += os.h * os.w;
                        } else if (sa.h && sa.w && sb.h && sb.w) {
                            const std::size_t m = std::size_t(os.h * os.w);
                            if (ga) kern::macc(m, go + oi, bc.data() + bbase, ga + abase);
                            if (gb) kern::macc(m, go + oi, ac.data() + abase, gb + bbase);
                            oi += os.h * os.w;
                        } else {
                            for (dim_t h = 0; h < os.h; ++h)
                                for (dim_t w = 0; w < os.w; ++w) {
                                    const T g = go[oi++];
                                    const dim_t ai = abase + h * sa.h + w * sa.w;
                                    const dim_t bi = bbase + h * sb.h + w * sb.w;
                                    if (ga) ga[ai] += g * bc.data()[bi];
                                    if (gb) gb[bi] += g * ac.data()[ai];
                                }
                        }
                    }
        });
    }
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    Tensor<T> out = Tensor<T>::empty(x.shape());
    kern::scale(x.size(), c, x.data(), out.data());
    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc, c]() mutable {
            if (xc.diff()) kern::axpy(oc.size(), c, oc.grad_vec().data(), xc.grad_data());
        });
    }
    return out;
}

// ---------------------------------------------------------------------
// softmax

namespace {

template <class T>
void axis_geometry(const Tensor<T>& x, Axis axis, dim_t& len, dim_t& stride) {
    const Shape5 s = x.shape();
    const dim_t sw = 1, sh = s.w, st = s.h * s.w, sc = s.t * s.h * s.w, sn = s.c * sc;
    switch (axis) {
        case Axis::N: len = s.n; stride = sn; break;
        case Axis::C: len = s.c; stride = sc; break;
        case Axis::T: len = s.t; stride = st; break;
        case Axis::H: len = s.h; stride = sh; break;
        case Axis::W: len = s.w; stride = sw; break;
    }
}

// Visits the base offset of every fiber along `axis`.
template <class T, class Fn>
void for_each_fiber(const Tensor<T>& x, Axis axis, Fn&& fn) {
    const Shape5 s = x.shape();
    for (dim_t n = 0; n < (axis == Axis::N ? 1 : s.n); ++n)
        for (dim_t c = 0; c < (axis == Axis::C ? 1 : s.c); ++c)
            for (dim_t t = 0; t < (axis == Axis::T ? 1 : s.t); ++t)
                for (dim_t h = 0; h < (axis == Axis::H ? 1 : s.h); ++h)
                    for (dim_t w = 0; w < (axis == Axis::W ? 1 : s.w); ++w)
                        fn(x.index(n, c, h, w, t));
}

}  // namespace

template <class T>
Tensor<T> softmax_over(const Tensor<T>& x, Axis axis) {
    Tensor<T> out = Tensor<T>::empty(x.shape());
    dim_t len = 0, stride = 0;
    axis_geometry(x, axis, len, stride);
    for_each_fiber(x, axis, [&](dim_t base) {
        T m = x.data()[base];
        for (dim_t i = 1; i < len; ++i) m = std::max(m, x.data()[base + i * stride]);
        T s = T(0);
        for (dim_t i = 0; i < len; ++i) {
            const T e = std::exp(x.data()[base + i * stride] - m);
            out.data()[base + i * stride] = e;
            s += e;
        }
        const T inv = T(1) / s;
        for (dim_t i = 0; i < len; ++i) out.data()[base + i * stride] *= inv;
    });
    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc, axis, len, stride]() mutable {
            if (!xc.diff()) return;
            T* gx = xc.grad_data();
            const T* go = oc.grad_vec().data();
            const T* s = oc.data();
            for_each_fiber(oc, axis, [&](dim_t base) {
                T dotgs = T(0);
                for (dim_t i = 0; i < len; ++i)
                    dotgs += go[base + i * stride] * s[base + i * stride];
                for (dim_t i = 0; i < len; ++i) {
                    const dim_t k = base + i * stride;
                    gx[k] += s[k] * (go[k] - dotgs);
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------------
// batchnorm

template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, T momentum, T eps,
                    bool training) {
    const Shape5 xs = x.shape();
    check_shape(gamma.shape().c == xs.c && beta.shape().c == xs.c,
                "batchnorm: gamma/beta length " + std::to_string(gamma.shape().c) +
                    " does not match channel count " + std::to_string(xs.c));
    const dim_t block = xs.t * xs.h * xs.w;
    const dim_t m = xs.n * block;
    Tensor<T> out = Tensor<T>::empty(xs);

    auto mean_t = Tensor<T>::zeros({1, xs.c, 1, 1, 1});
    auto invstd_t = Tensor<T>::zeros({1, xs.c, 1, 1, 1});

    kern::parallel_for(xs.c, [&](dim_t cb, dim_t ce) {
        for (dim_t c = cb; c < ce; ++c) {
            T mean, var;
            if (training) {
                T s = T(0), sq = T(0);
                for (dim_t n = 0; n < xs.n; ++n) {
                    const T* bx = x.data() + x.index(n, c, 0, 0, 0);
                    s += kern::sum(std::size_t(block), bx);
                    sq += kern::dot(std::size_t(block), bx, bx);
                }
                mean = s / T(m);
                var = sq / T(m) - mean * mean;
                if (var < T(0)) var = T(0);
                running_mean.data()[c] += momentum * (mean - running_mean.data()[c]);
                running_var.data()[c] += momentum * (var - running_var.data()[c]);
            } else {
                mean = running_mean.data()[c];
                var = running_var.data()[c];
            }
            const T invstd = T(1) / std::sqrt(var + eps);
            mean_t.data()[c] = mean;
            invstd_t.data()[c] = invstd;
            const T a = gamma.data()[c] * invstd;
            const T b = beta.data()[c] - mean * a;
            for (dim_t n = 0; n < xs.n; ++n)
                kern::affine(std::size_t(block), a, b, x.data() + x.index(n, c, 0, 0, 0),
                             out.data() + out.index(n, c, 0, 0, 0));
        }
    });

    Tensor<T> xc = x, gc = gamma, bc = beta, oc = out;
    if (recording(out, x, gamma, beta)) {
        Tape<T>::current()->record(out, [xc, gc, bc, oc, mean_t, invstd_t, m, block, training]() mutable {
            const Shape5 xs2 = xc.shape();
            const T* go = oc.grad_vec().data();
            const bool want_x = xc.diff();
            if (want_x) xc.grad_data();
            if (gc.diff()) gc.grad_data();
            if (bc.diff()) bc.grad_data();
            kern::parallel_for(xs2.c, [&](dim_t cb, dim_t ce) {
                for (dim_t c = cb; c < ce; ++c) {
                    const T mean = mean_t.data()[c];
                    const T invstd = invstd_t.data()[c];
                    T sg = T(0), sgx = T(0);
                    for (dim_t n = 0; n < xs2.n; ++n) {
                        const dim_t off = xc.index(n, c, 0, 0, 0);
                        sg += kern::sum(std::size_t(block), go + off);
                        sgx += kern::dot(std::size_t(block), go + off, xc.data() + off);
                    }
                    const T sghat = (sgx - mean * sg) * invstd;  // sum g * xhat
                    if (gc.diff()) gc.grad_data()[c] += sghat;
                    if (bc.diff()) bc.grad_data()[c] += sg;
                    if (!want_x) continue;
                    const T k1 = gc.data()[c] * invstd;
                    if (training) {
                        const T k2 = k1 * invstd * sghat / T(m);
                        const T k0 = k2 * mean - k1 * sg / T(m);
                        for (dim_t n = 0; n < xs2.n; ++n) {
                            const dim_t off = xc.index(n, c, 0, 0, 0);
                            T* gx = xc.grad_data() + off;
                            kern::axpy(std::size_t(block), k1, go + off, gx);
                            kern::axpy(std::size_t(block), -k2, xc.data() + off, gx);
                            kern::adds(std::size_t(block), k0, gx);
                        }
                    } else {
                        for (dim_t n = 0; n < xs2.n; ++n) {
                            const dim_t off = xc.index(n, c, 0, 0, 0);
                            kern::axpy(std::size_t(block), k1, go + off, xc.grad_data() + off);
                        }
                    }
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------------
// structural ops

template <class T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& items, const Tensor<T>& weights) {
    check_shape(dim_t(items.size()) == weights.numel(),
                "weighted_sum: " + std::to_string(items.size()) + " items vs " +
                    std::to_string(weights.numel()) + " weights");
    Shape5 shape;
    bool found = false;
    for (const auto& it : items)
        if (it.defined()) {
            if (!found) {
                shape = it.shape();
                found = true;
            } else {
                check_shape(it.shape() == shape, "weighted_sum: item shape " + it.shape().str() +
                                                     " differs from " + shape.str());
            }
        }
    check_shape(found, "weighted_sum: all items undefined");
    Tensor<T> out = Tensor<T>::empty(shape);
    bool started = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].defined()) continue;
        if (!started) {
            kern::scale(out.size(), weights.data()[i], items[i].data(), out.data());
            started = true;
        } else {
            kern::axpy(out.size(), weights.data()[i], items[i].data(), out.data());
        }
    }

    Tensor<T> wc = weights, oc = out;
    std::vector<Tensor<T>> ic = items;
    bool any = weights.diff();
    for (const auto& it : items) any = any || (it.defined() && it.diff());
    Tape<T>* tape = Tape<T>::current();
    if (tape && any) {
        out.mark_diff();
        tape->record(out, [ic, wc, oc]() mutable {
            const T* go = oc.grad_vec().data();
            T* gw = wc.diff() ? wc.grad_data() : nullptr;
            for (std::size_t i = 0; i < ic.size(); ++i) {
                if (!ic[i].defined()) continue;  // exact zero item: no grad either way
                if (ic[i].diff())
                    kern::axpy(oc.size(), wc.data()[i], go, ic[i].grad_data());
                if (gw) gw[i] += kern::dot(oc.size(), go, ic[i].data());
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& items) {
    check_shape(!items.empty(), "concat_channels: no items");
    const Shape5 first = items[0].shape();
    dim_t cs = 0;
    for (const auto& it : items) {
        const Shape5 s = it.shape();
        check_shape(s.n == first.n && s.h == first.h && s.w == first.w && s.t == first.t,
                    "concat_channels: shape " + s.str() + " incompatible with " + first.str());
        cs += s.c;
    }
    Shape5 os = first;
    os.c = cs;
    Tensor<T> out = Tensor<T>::empty(os);
    const dim_t inner = first.t * first.h * first.w;
    for (dim_t n = 0; n < os.n; ++n) {
        dim_t coff = 0;
        for (const auto& it : items) {
            const dim_t len = it.shape().c * inner;
            kern::copy(std::size_t(len), it.data() + n * len, out.data() + (n * cs + coff) * inner);
            coff += it.shape().c;
        }
    }

    std::vector<Tensor<T>> ic = items;
    Tensor<T> oc = out;
    bool any = false;
    for (const auto& it : items) any = any || it.diff();
    Tape<T>* tape = Tape<T>::current();
    if (tape && any) {
        out.mark_diff();
        tape->record(out, [ic, oc, inner, cs]() mutable {
            const T* go = oc.grad_vec().data();
            const dim_t N = oc.shape().n;
            for (dim_t n = 0; n < N; ++n) {
                dim_t coff = 0;
                for (auto& it : ic) {
                    const dim_t len = it.shape().c * inner;
                    if (it.diff())
                        kern::axpy(std::size_t(len), T(1), go + (n * cs + coff) * inner,
                                   it.grad_data() + n * len);
                    coff += it.shape().c;
                }
            }
        });
    }
    return out;
}

template <class T>
Tensor<T> replicate_t(const Tensor<T>& x, dim_t t) {
    const Shape5 xs = x.shape();
    check_shape(xs.t == 1, "replicate_t: input time axis must be 1, got " + std::to_string(xs.t));
    Shape5 os = xs;
    os.t = t;
    Tensor<T> out = Tensor<T>::empty(os);
    const dim_t hw = xs.h * xs.w;
    for (dim_t n = 0; n < xs.n; ++n)
        for (dim_t c = 0; c < xs.c; ++c)
            for (dim_t k = 0; k < t; ++k)
                kern::copy(std::size_t(hw), plane(x, n, c, 0), plane(out, n, c, k));
    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc, t, hw]() mutable {
            if (!xc.diff()) return;
            const Shape5 xs2 = xc.shape();
            for (dim_t n = 0; n < xs2.n; ++n)
                for (dim_t c = 0; c < xs2.c; ++c)
                    for (dim_t k = 0; k < t; ++k)
                        kern::axpy(std::size_t(hw), T(1),
                                   oc.grad_vec().data() + oc.index(n, c, 0, 0, k),
                                   grad_plane(xc, n, c, 0));
        });
    }
    return out;
}

template <class T>
Tensor<T> take_row(const Tensor<T>& x, dim_t i) {
    const Shape5 xs = x.shape();
    check_shape(i >= 0 && i < xs.n, "take_row: row " + std::to_string(i) + " out of range N=" +
                                        std::to_string(xs.n));
    Shape5 os = xs;
    os.n = 1;
    Tensor<T> out = Tensor<T>::empty(os);
    const dim_t len = os.numel();
    kern::copy(std::size_t(len), x.data() + i * len, out.data());
    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc, i, len]() mutable {
            if (xc.diff())
                kern::axpy(std::size_t(len), T(1), oc.grad_vec().data(), xc.grad_data() + i * len);
        });
    }
    return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape5 s) {
    check_shape(s.numel() == x.numel(), "reshape: numel mismatch " + x.shape().str() + " -> " + s.str());
    Tensor<T> out = Tensor<T>::empty(s);
    kern::copy(x.size(), x.data(), out.data());
    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc]() mutable {
            if (xc.diff()) xc.accumulate_grad(oc.grad_vec().data());
        });
    }
    return out;
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros({1, 1, 1, 1, 1});
    out.data()[0] = kern::sum(x.size(), x.data());
    Tensor<T> xc = x, oc = out;
    if (recording(out, x)) {
        Tape<T>::current()->record(out, [xc, oc]() mutable {
            if (xc.diff()) kern::adds(xc.size(), oc.grad_vec()[0], xc.grad_data());
        });
    }
    return out;
}

// ---------------------------------------------------------------------

#define SPIKENAS_INSTANTIATE_OPS(T)                                                              \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Conv2dSpec&);         \
    template Tensor<T> pool2d<T>(const Tensor<T>&, PoolKind, dim_t, dim_t, dim_t);               \
    template Tensor<T> reduce_pool<T>(const Tensor<T>&, AxisSet, PoolKind);                      \
    template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                                             \
    template Tensor<T> relu<T>(const Tensor<T>&);                                                \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                            \
    template Tensor<T> softmax_over<T>(const Tensor<T>&, Axis);                                  \
    template Tensor<T> batchnorm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                    Tensor<T>&, Tensor<T>&, T, T, bool);                         \
    template Tensor<T> weighted_sum<T>(const std::vector<Tensor<T>>&, const Tensor<T>&);         \
    template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);                        \
    template Tensor<T> replicate_t<T>(const Tensor<T>&, dim_t);                                  \
    template Tensor<T> take_row<T>(const Tensor<T>&, dim_t);                                     \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape5);                                     \
    template Tensor<T> sum_all<T>(const Tensor<T>&);

SPIKENAS_INSTANTIATE_OPS(float)
SPIKENAS_INSTANTIATE_OPS(double)

}  // namespace spikenas
