// Scalar reference lane. These loops are the ground truth the SIMD lanes
// are tested against. Multiply-accumulate uses std::fma so results match
// hardware-FMA lanes bit for bit on elementwise kernels.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "spikenas/kernels.hpp"

namespace spikenas::kern::detail {

namespace {

template <class T>
void s_fill(std::size_t n, T v, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = v;
}

template <class T>
void s_copy(std::size_t n, const T* x, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i];
}

template <class T>
void s_axpy(std::size_t n, T a, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

template <class T>
void s_axpy_sx(std::size_t n, T a, const T* x, std::ptrdiff_t sx, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[std::ptrdiff_t(i) * sx], y[i]);
}

template <class T>
void s_axpy_sy(std::size_t n, T a, const T* x, T* y, std::ptrdiff_t sy) {
    for (std::size_t i = 0; i < n; ++i) {
        T* p = y + std::ptrdiff_t(i) * sy;
        *p = std::fma(a, x[i], *p);
    }
}

template <class T>
void s_axpy_rows(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xs, T* y,
                 std::ptrdiff_t ys) {
    if (xs == std::ptrdiff_t(m) && ys == std::ptrdiff_t(m)) {
        s_axpy(rows * m, a, x, y);
        return;
    }
    for (std::size_t r = 0; r < rows; ++r)
        s_axpy(m, a, x + std::ptrdiff_t(r) * xs, y + std::ptrdiff_t(r) * ys);
}

template <class T>
T s_dot(std::size_t n, const T* x, const T* y) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc = std::fma(x[i], y[i], acc);
    return acc;
}

template <class T>
T s_dot_sx(std::size_t n, const T* x, std::ptrdiff_t sx, const T* y) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc = std::fma(x[std::ptrdiff_t(i) * sx], y[i], acc);
    return acc;
}

template <class T>
T s_dot_rows(std::size_t rows, std::size_t m, const T* x, std::ptrdiff_t xs, const T* y,
             std::ptrdiff_t ys) {
    if (xs == std::ptrdiff_t(m) && ys == std::ptrdiff_t(m)) return s_dot(rows * m, x, y);
    T acc = T(0);
    for (std::size_t r = 0; r < rows; ++r)
        acc += s_dot(m, x + std::ptrdiff_t(r) * xs, y + std::ptrdiff_t(r) * ys);
    return acc;
}

template <class T>
void s_add(std::size_t n, const T* a, const T* b, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void s_mul(std::size_t n, const T* a, const T* b, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void s_macc(std::size_t n, const T* a, const T* b, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::fma(a[i], b[i], out[i]);
}

template <class T>
void s_scale(std::size_t n, T a, const T* x, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

template <class T>
void s_affine(std::size_t n, T a, T b, const T* x, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::fma(a, x[i], b);
}

template <class T>
void s_adds(std::size_t n, T v, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += v;
}

template <class T>
void s_sigmoid(std::size_t n, const T* x, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <class T>
void s_relu(std::size_t n, const T* x, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
T s_sum(std::size_t n, const T* x) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <class T>
T s_max(std::size_t n, const T* x) {
    T m = x[0];
    for (std::size_t i = 1; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

template <class T>
std::size_t s_count_ones(std::size_t n, const T* x) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += (x[i] == T(1));
    return c;
}

template <class T>
void s_heaviside(std::size_t n, const T* x, T* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? T(1) : T(0);
}

template <class T>
void s_lif_backward_step(std::size_t n, T tau, T vth, T inv_a, T half_a, const T* u, const T* o,
                         const T* go, T* carry, T* gx) {
    for (std::size_t i = 0; i < n; ++i) {
        const T v = u[i] - vth;
        const T surr = (v < half_a && v > -half_a) ? inv_a : T(0);
        const T factor = tau * (T(1) - o[i]) - (tau * u[i]) * surr;
        const T du = std::fma(go[i], surr, carry[i] * factor);
        gx[i] += du;
        carry[i] = du;
    }
}

template <class T>
void s_axpy_sx_rows(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xrs,
                    std::ptrdiff_t sx, T* y, std::ptrdiff_t yrs) {
    for (std::size_t r = 0; r < rows; ++r)
        s_axpy_sx(m, a, x + std::ptrdiff_t(r) * xrs, sx, y + std::ptrdiff_t(r) * yrs);
}

template <class T>
void s_axpy_sy_rows(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xrs, T* y,
                    std::ptrdiff_t yrs, std::ptrdiff_t sy) {
    for (std::size_t r = 0; r < rows; ++r)
        s_axpy_sy(m, a, x + std::ptrdiff_t(r) * xrs, y + std::ptrdiff_t(r) * yrs, sy);
}

template <class T>
T s_dot_sx_rows(std::size_t rows, std::size_t m, const T* x, std::ptrdiff_t xrs,
                std::ptrdiff_t sx, const T* y, std::ptrdiff_t yrs) {
    T acc = T(0);
    for (std::size_t r = 0; r < rows; ++r)
        acc += s_dot_sx(m, x + std::ptrdiff_t(r) * xrs, sx, y + std::ptrdiff_t(r) * yrs);
    return acc;
}

template <class T>
void s_pool3_max(std::int64_t h, std::int64_t w, std::int64_t ho, std::int64_t wo,
                 std::int64_t stride, std::int64_t pad, const T* px, T* po) {
    const T ninf = -std::numeric_limits<T>::infinity();
    thread_local std::vector<T> scratch;
    const std::size_t needed = std::size_t(w + 2 * pad + 2);
    if (scratch.size() != needed) scratch.assign(needed, ninf);
    T* padded = scratch.data();
    for (std::int64_t oh = 0; oh < ho; ++oh) {
        // vertical max of up to three rows, written into the padded scratch
        bool first = true;
        for (std::int64_t r = 0; r < 3; ++r) {
            const std::int64_t ih = oh * stride - pad + r;
            if (ih < 0 || ih >= h) continue;
            const T* row = px + ih * w;
            if (first) {
                for (std::int64_t i = 0; i < w; ++i) padded[pad + i] = row[i];
                first = false;
            } else {
                for (std::int64_t i = 0; i < w; ++i)
                    if (row[i] > padded[pad + i]) padded[pad + i] = row[i];
            }
        }
        if (first)
            for (std::int64_t i = 0; i < w; ++i) padded[pad + i] = ninf;
        T* out = po + oh * wo;
        for (std::int64_t ow = 0; ow < wo; ++ow) {
            const T* win = padded + ow * stride;
            T m = win[0];
            if (win[1] > m) m = win[1];
            if (win[2] > m) m = win[2];
            out[ow] = m;
        }
    }
}

template <class T>
void s_lif_step(std::size_t n, T tau, T vth, const T* u_prev, const T* o_prev,
                const T* x, T* u, T* o) {
    for (std::size_t i = 0; i < n; ++i) {
        T decayed = tau * u_prev[i] * (T(1) - o_prev[i]);
        T ui = decayed + x[i];
        u[i] = ui;
        o[i] = (ui - vth) > T(0) ? T(1) : T(0);
    }
}

}  // namespace

template <class T>
Table<T> scalar_table() {
    Table<T> t;
    t.fill = s_fill<T>;
    t.copy = s_copy<T>;
    t.axpy = s_axpy<T>;
    t.axpy_sx = s_axpy_sx<T>;
    t.axpy_sy = s_axpy_sy<T>;
    t.axpy_rows = s_axpy_rows<T>;
    t.dot = s_dot<T>;
    t.dot_sx = s_dot_sx<T>;
    t.dot_rows = s_dot_rows<T>;
    t.add = s_add<T>;
    t.mul = s_mul<T>;
    t.macc = s_macc<T>;
    t.scale = s_scale<T>;
    t.affine = s_affine<T>;
    t.adds = s_adds<T>;
    t.sigmoid = s_sigmoid<T>;
    t.relu = s_relu<T>;
    t.sum = s_sum<T>;
    t.max = s_max<T>;
    t.count_ones = s_count_ones<T>;
    t.heaviside = s_heaviside<T>;
    t.lif_step = s_lif_step<T>;
    t.lif_backward_step = s_lif_backward_step<T>;
    t.axpy_sx_rows = s_axpy_sx_rows<T>;
    t.axpy_sy_rows = s_axpy_sy_rows<T>;
    t.dot_sx_rows = s_dot_sx_rows<T>;
    t.pool3_max = s_pool3_max<T>;
    return t;
}

template Table<float> scalar_table<float>();
template Table<double> scalar_table<double>();

}  // namespace spikenas::kern::detail
