#pragma once

// Dense 5-D tensors with reverse-mode differentiation. Feature maps are
// ordered (batch, channel, height, width, time); storage nests the time
// axis between channel and height so each per-time-slice H*W plane is
// contiguous:
//
//   index(n,c,h,w,t) = ((((n*C + c)*T + t)*H + h)*W + w
//
// Tensors are immutable once produced by an op; only gradient buffers are
// mutated, and only inside backward.

#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "spikenas/error.hpp"
#include "spikenas/kernels.hpp"

namespace spikenas {

using dim_t = std::int64_t;

struct Shape5 {
    dim_t n = 1, c = 1, h = 1, w = 1, t = 1;

    dim_t numel() const { return n * c * h * w * t; }

    bool operator==(const Shape5& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w && t == o.t;
    }
    bool operator!=(const Shape5& o) const { return !(*this == o); }

    std::string str() const {
        std::ostringstream os;
        os << "(" << n << "," << c << "," << h << "," << w << "," << t << ")";
        return os.str();
    }
};

namespace detail {

template <class T>
struct TensorData {
    Shape5 shape;
    std::vector<T> val;
    std::vector<T> grad;       // allocated on first accumulation
    bool requires_grad = false;  // user-marked leaf
    bool diff = false;           // participates in a recorded graph
};

}  // namespace detail

template <class T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape5 s) {
        Tensor t;
        t.d_ = std::make_shared<detail::TensorData<T>>();
        t.d_->shape = s;
        t.d_->val.assign(std::size_t(s.numel()), T(0));
        return t;
    }

    static Tensor full(Shape5 s, T v) {
        Tensor t = zeros(s);
        kern::fill(t.size(), v, t.data());
        return t;
    }

    static Tensor from_values(Shape5 s, std::vector<T> values) {
        check_shape(dim_t(values.size()) == s.numel(),
                    "from_values: got " + std::to_string(values.size()) +
                        " values for shape " + s.str());
        Tensor t;
        t.d_ = std::make_shared<detail::TensorData<T>>();
        t.d_->shape = s;
        t.d_->val = std::move(values);
        return t;
    }

    // Uninitialized storage for op outputs.
    static Tensor empty(Shape5 s) {
        Tensor t;
        t.d_ = std::make_shared<detail::TensorData<T>>();
        t.d_->shape = s;
        t.d_->val.resize(std::size_t(s.numel()));
        return t;
    }

    bool defined() const { return bool(d_); }
    const Shape5& shape() const { return d_->shape; }
    std::size_t size() const { return d_->val.size(); }
    dim_t numel() const { return d_->shape.numel(); }

    T* data() { return d_->val.data(); }
    const T* data() const { return d_->val.data(); }

    dim_t index(dim_t n, dim_t c, dim_t h, dim_t w, dim_t t) const {
        const Shape5& s = d_->shape;
        return ((((n * s.c + c) * s.t + t) * s.h + h) * s.w + w);
    }
    T& at(dim_t n, dim_t c, dim_t h, dim_t w, dim_t t) { return d_->val[std::size_t(index(n, c, h, w, t))]; }
    T at(dim_t n, dim_t c, dim_t h, dim_t w, dim_t t) const { return d_->val[std::size_t(index(n, c, h, w, t))]; }

    bool requires_grad() const { return d_->requires_grad; }
    Tensor& set_requires_grad(bool v = true) {
        d_->requires_grad = v;
        if (v) d_->diff = true;
        return *this;
    }

    // Leaf-only: temporarily excludes the tensor from gradient computation
    // (the bilevel loop freezes one parameter group per pass).
    void freeze(bool frozen) {
        d_->requires_grad = !frozen;
        d_->diff = !frozen;
    }

    // True when gradients should flow into/through this tensor.
    bool diff() const { return d_ && d_->diff; }
    void mark_diff() { d_->diff = true; }

    bool has_grad() const { return !d_->grad.empty(); }

    // Gradient buffer, allocated as zeros on first use.
    T* grad_data() {
        if (d_->grad.empty()) d_->grad.assign(d_->val.size(), T(0));
        return d_->grad.data();
    }
    const std::vector<T>& grad_vec() const { return d_->grad; }

    void zero_grad() {
        if (!d_->grad.empty()) kern::fill(d_->grad.size(), T(0), d_->grad.data());
    }

    // y.grad += src
    void accumulate_grad(const T* src) {
        kern::axpy(size(), T(1), src, grad_data());
    }

    bool same_storage(const Tensor& o) const { return d_ == o.d_; }

    std::vector<T>& vec() { return d_->val; }
    const std::vector<T>& vec() const { return d_->val; }

private:
    std::shared_ptr<detail::TensorData<T>> d_;
};

// Reverse-mode tape. Ops record their backward closure while a Tape is
// active (RAII Scope); Tape::backward replays closures in reverse
// execution order, which is a valid topological order of the graph.
template <class T>
class Tape {
public:
    class Scope {
    public:
        explicit Scope(Tape& t) : prev_(current_) { current_ = &t; }
        ~Scope() { current_ = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    static Tape* current() { return current_; }

    void record(Tensor<T> output, std::function<void()> backward_fn) {
        entries_.push_back({std::move(output), std::move(backward_fn)});
    }

    std::size_t size() const { return entries_.size(); }

    // Populates grads of every diff tensor reachable from loss. Leaf grads
    // accumulate across calls; intermediate grads are reset per call.
    void backward(Tensor<T> loss) {
        if (loss.numel() != 1)
            throw ShapeError("backward requires a scalar loss, got shape " + loss.shape().str());
        for (auto& e : entries_)
            if (e.output.has_grad()) e.output.zero_grad();
        loss.grad_data()[0] += T(1);
        // An entry whose output never received gradient feeds a dangling
        // branch; skip it.
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
            if (it->fn && it->output.has_grad()) it->fn();
    }

    void clear() { entries_.clear(); }

private:
    struct Entry {
        Tensor<T> output;
        std::function<void()> fn;
    };
    std::vector<Entry> entries_;
    static thread_local Tape* current_;
};

template <class T>
thread_local Tape<T>* Tape<T>::current_ = nullptr;

// Decides whether an op with the given inputs should record onto the
// active tape; marks the output differentiable if so.
template <class T, class... Inputs>
bool recording(Tensor<T>& out, const Inputs&... ins) {
    Tape<T>* tape = Tape<T>::current();
    if (!tape) return false;
    bool any = (... || ins.diff());
    if (any) out.mark_diff();
    return any;
}

enum class Role { weight, alpha };
enum class Subsystem { backbone, attention };

// How a parameter is filled by the deterministic init pass. zeros/ones are
// already in place at registration.
enum class InitKind { fan_in_uniform, zeros, ones, alpha_noise };

template <class T>
struct Parameter {
    Tensor<T> tensor;
    std::string name;
    Role role = Role::weight;
    Subsystem subsystem = Subsystem::backbone;
    InitKind init = InitKind::fan_in_uniform;
};

}  // namespace spikenas
