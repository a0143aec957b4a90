#pragma once

// Array kernels behind the tensor engine. Every kernel has a scalar
// reference implementation and may have SIMD variants; the active lane is
// chosen at startup from CPU capabilities and can be overridden
// programmatically (tests switch lanes to run the equivalence suite).
//
// Elementwise kernels are bitwise identical across lanes: the scalar
// reference uses std::fma where the SIMD lane uses hardware FMA, so both
// round once. Reduction kernels (sum, dot, max) may differ in the last
// bits across lanes because the accumulation tree differs; within one lane
// they are deterministic.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

namespace spikenas::kern {

enum class Lane { scalar, avx2 };

const char* lane_name(Lane lane);
bool lane_available(Lane lane);
Lane active_lane();
// Throws spikenas::ConfigError if the lane is not available on this CPU.
void set_lane(Lane lane);

// Thread count for parallel_for. Defaults to SPIKENAS_THREADS if set,
// otherwise the hardware concurrency. Kernel outputs are bitwise invariant
// under the thread count: work is split into contiguous chunks whose
// outputs are disjoint, and no reduction is ever threaded.
int thread_count();
void set_thread_count(int n);

// Runs body(begin, end) over contiguous chunks of [0, n).
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

template <class T>
struct Table {
    void (*fill)(std::size_t n, T v, T* out);
    void (*copy)(std::size_t n, const T* x, T* out);
    // y[i] += a * x[i]
    void (*axpy)(std::size_t n, T a, const T* x, T* y);
    // y[i] += a * x[i * sx]
    void (*axpy_sx)(std::size_t n, T a, const T* x, std::ptrdiff_t sx, T* y);
    // y[i * sy] += a * x[i]
    void (*axpy_sy)(std::size_t n, T a, const T* x, T* y, std::ptrdiff_t sy);
    // y[r*ys + i] += a * x[r*xs + i] for r in [0,rows), i in [0,m);
    // the workhorse of the convolution taps
    void (*axpy_rows)(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xs,
                      T* y, std::ptrdiff_t ys);
    T (*dot)(std::size_t n, const T* x, const T* y);
    // sum_i x[i * sx] * y[i]
    T (*dot_sx)(std::size_t n, const T* x, std::ptrdiff_t sx, const T* y);
    // sum over rows of dot(x_row, y_row)
    T (*dot_rows)(std::size_t rows, std::size_t m, const T* x, std::ptrdiff_t xs, const T* y,
                  std::ptrdiff_t ys);
    void (*add)(std::size_t n, const T* a, const T* b, T* out);
    void (*mul)(std::size_t n, const T* a, const T* b, T* out);
    // out[i] += a[i] * b[i]
    void (*macc)(std::size_t n, const T* a, const T* b, T* out);
    // out[i] = a * x[i]
    void (*scale)(std::size_t n, T a, const T* x, T* out);
    // out[i] = a * x[i] + b
    void (*affine)(std::size_t n, T a, T b, const T* x, T* out);
    // y[i] += v
    void (*adds)(std::size_t n, T v, T* y);
    void (*sigmoid)(std::size_t n, const T* x, T* out);
    void (*relu)(std::size_t n, const T* x, T* out);
    T (*sum)(std::size_t n, const T* x);
    T (*max)(std::size_t n, const T* x);
    // exact count of elements equal to one (spike tensors are {0,1})
    std::size_t (*count_ones)(std::size_t n, const T* x);
    // out[i] = x[i] > 0 ? 1 : 0  (strict: 0 at the threshold)
    void (*heaviside)(std::size_t n, const T* x, T* out);
    // fused LIF update: u = tau*u_prev*(1-o_prev) + x; o = (u - vth > 0)
    void (*lif_step)(std::size_t n, T tau, T vth, const T* u_prev,
                     const T* o_prev, const T* x, T* u, T* o);
    // fused backward-through-time step:
    //   surr = |u - vth| < half_a ? inv_a : 0
    //   du = go*surr + carry*(tau*(1-o) - tau*u*surr)
    //   gx += du; carry = du
    void (*lif_backward_step)(std::size_t n, T tau, T vth, T inv_a, T half_a, const T* u,
                              const T* o, const T* go, T* carry, T* gx);
    // y_rows contiguous (m), x rows strided by sx within the row
    void (*axpy_sx_rows)(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xrs,
                         std::ptrdiff_t sx, T* y, std::ptrdiff_t yrs);
    // x rows contiguous, y rows strided by sy within the row
    void (*axpy_sy_rows)(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xrs,
                         T* y, std::ptrdiff_t yrs, std::ptrdiff_t sy);
    T (*dot_sx_rows)(std::size_t rows, std::size_t m, const T* x, std::ptrdiff_t xrs,
                     std::ptrdiff_t sx, const T* y, std::ptrdiff_t yrs);
    // full-plane max pooling with a 3x3 window (the search space's only
    // pooling window); pads with -inf
    void (*pool3_max)(std::int64_t h, std::int64_t w, std::int64_t ho, std::int64_t wo,
                      std::int64_t stride, std::int64_t pad, const T* px, T* po);
};

template <class T>
const Table<T>& table();

template <> const Table<float>& table<float>();
template <> const Table<double>& table<double>();

// Convenience wrappers.
template <class T> inline void fill(std::size_t n, T v, T* out) { table<T>().fill(n, v, out); }
template <class T> inline void copy(std::size_t n, const T* x, T* out) { table<T>().copy(n, x, out); }
template <class T> inline void axpy(std::size_t n, T a, const T* x, T* y) { table<T>().axpy(n, a, x, y); }
template <class T> inline void axpy_sx(std::size_t n, T a, const T* x, std::ptrdiff_t sx, T* y) { table<T>().axpy_sx(n, a, x, sx, y); }
template <class T> inline void axpy_sy(std::size_t n, T a, const T* x, T* y, std::ptrdiff_t sy) { table<T>().axpy_sy(n, a, x, y, sy); }
template <class T> inline void axpy_rows(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xs, T* y, std::ptrdiff_t ys) { table<T>().axpy_rows(rows, m, a, x, xs, y, ys); }
template <class T> inline T dot(std::size_t n, const T* x, const T* y) { return table<T>().dot(n, x, y); }
template <class T> inline T dot_sx(std::size_t n, const T* x, std::ptrdiff_t sx, const T* y) { return table<T>().dot_sx(n, x, sx, y); }
template <class T> inline T dot_rows(std::size_t rows, std::size_t m, const T* x, std::ptrdiff_t xs, const T* y, std::ptrdiff_t ys) { return table<T>().dot_rows(rows, m, x, xs, y, ys); }
template <class T> inline void add(std::size_t n, const T* a, const T* b, T* out) { table<T>().add(n, a, b, out); }
template <class T> inline void mul(std::size_t n, const T* a, const T* b, T* out) { table<T>().mul(n, a, b, out); }
template <class T> inline void macc(std::size_t n, const T* a, const T* b, T* out) { table<T>().macc(n, a, b, out); }
template <class T> inline void scale(std::size_t n, T a, const T* x, T* out) { table<T>().scale(n, a, x, out); }
template <class T> inline void affine(std::size_t n, T a, T b, const T* x, T* out) { table<T>().affine(n, a, b, x, out); }
template <class T> inline void adds(std::size_t n, T v, T* y) { table<T>().adds(n, v, y); }
template <class T> inline void sigmoid(std::size_t n, const T* x, T* out) { table<T>().sigmoid(n, x, out); }
template <class T> inline void relu(std::size_t n, const T* x, T* out) { table<T>().relu(n, x, out); }
template <class T> inline T sum(std::size_t n, const T* x) { return table<T>().sum(n, x); }
template <class T> inline T max(std::size_t n, const T* x) { return table<T>().max(n, x); }
template <class T> inline std::size_t count_ones(std::size_t n, const T* x) { return table<T>().count_ones(n, x); }
template <class T> inline void heaviside(std::size_t n, const T* x, T* out) { table<T>().heaviside(n, x, out); }
template <class T> inline void lif_step(std::size_t n, T tau, T vth, const T* u_prev, const T* o_prev, const T* x, T* u, T* o) {
    table<T>().lif_step(n, tau, vth, u_prev, o_prev, x, u, o);
}
template <class T> inline void lif_backward_step(std::size_t n, T tau, T vth, T inv_a, T half_a, const T* u, const T* o, const T* go, T* carry, T* gx) {
    table<T>().lif_backward_step(n, tau, vth, inv_a, half_a, u, o, go, carry, gx);
}
template <class T> inline void axpy_sx_rows(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xrs, std::ptrdiff_t sx, T* y, std::ptrdiff_t yrs) {
    table<T>().axpy_sx_rows(rows, m, a, x, xrs, sx, y, yrs);
}
template <class T> inline void axpy_sy_rows(std::size_t rows, std::size_t m, T a, const T* x, std::ptrdiff_t xrs, T* y, std::ptrdiff_t yrs, std::ptrdiff_t sy) {
    table<T>().axpy_sy_rows(rows, m, a, x, xrs, y, yrs, sy);
}
template <class T> inline T dot_sx_rows(std::size_t rows, std::size_t m, const T* x, std::ptrdiff_t xrs, std::ptrdiff_t sx, const T* y, std::ptrdiff_t yrs) {
    return table<T>().dot_sx_rows(rows, m, x, xrs, sx, y, yrs);
}
template <class T> inline void pool3_max(std::int64_t h, std::int64_t w, std::int64_t ho, std::int64_t wo, std::int64_t stride, std::int64_t pad, const T* px, T* po) {
    table<T>().pool3_max(h, w, ho, wo, stride, pad, px, po);
}

namespace detail {
template <class T> Table<T> scalar_table();
template <class T> Table<T> avx2_table();  // only valid if lane_available(avx2)
}  // namespace detail

}  // namespace spikenas::kern
