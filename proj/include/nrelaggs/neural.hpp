#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nrelaggs/errors.hpp"
#include "nrelaggs/matrix.hpp"

// Differentiable building blocks with hand-written backward passes. Every
// primitive is templated on the scalar so gradient checks can run the exact
// same code in double precision.

namespace nrelaggs {

enum class Activation { linear, relu };

template <typename T>
struct DenseGrad {
    Matrix<T> weights;
    std::vector<T> bias;
};

/// y = act(x W + b) with W stored in x out.
template <typename T>
struct DenseLayer {
    Matrix<T> weights;
    std::vector<T> bias;
    Activation activation = Activation::linear;

    std::size_t inputs() const noexcept { return weights.rows(); }
    std::size_t outputs() const noexcept { return weights.cols(); }

    /// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero bias.
    static DenseLayer glorot(std::size_t in, std::size_t out, Activation activation, std::mt19937_64& rng) {
        DenseLayer layer{Matrix<T>(in, out), std::vector<T>(out, T{0}), activation};
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (auto& w : layer.weights.flat()) w = static_cast<T>(dist(rng));
        return layer;
    }

    /// Passes the first min(in, out) inputs through unchanged.
    static DenseLayer identity(std::size_t in, std::size_t out) {
        DenseLayer layer{Matrix<T>(in, out), std::vector<T>(out, T{0}), Activation::linear};
        for (std::size_t i = 0; i < std::min(in, out); ++i) layer.weights(i, i) = T{1};
        return layer;
    }

    Matrix<T> forward(const Matrix<T>& x) const {
        if (x.cols() != inputs())
            fail(ErrorCode::shape_mismatch, "dense layer expects width " + std::to_string(inputs()) + ", got " +
                                                std::to_string(x.cols()));
        Matrix<T> y(x.rows(), outputs());
        const std::size_t n_in = inputs(), n_out = outputs();
        const T* __restrict w = weights.flat().data();
        for (std::size_t r = 0; r < x.rows(); ++r) {
            T* __restrict out = y.row(r).data();
            const T* __restrict in = x.row(r).data();
            std::copy(bias.begin(), bias.end(), out);
            for (std::size_t i = 0; i < n_in; ++i) {
                const T xi = in[i];
                const T* __restrict wi = w + i * n_out;
                for (std::size_t j = 0; j < n_out; ++j) out[j] += xi * wi[j];
            }
            if (activation == Activation::relu)
                for (std::size_t j = 0; j < n_out; ++j) out[j] = out[j] > T{0} ? out[j] : T{0};
        }
        return y;
    }

    DenseGrad<T> zero_grad() const { return {Matrix<T>(inputs(), outputs()), std::vector<T>(outputs(), T{0})}; }

    /// Accumulates parameter gradients into `grad` and returns dL/dx (empty
    /// when `need_input_grad` is false). `y` is the forward output (used for
    /// the ReLU mask).
    Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& y, const Matrix<T>& grad_y, DenseGrad<T>& grad,
                       bool need_input_grad = true) const {
        if (grad_y.rows() != x.rows() || grad_y.cols() != outputs() || y.rows() != x.rows())
            fail(ErrorCode::shape_mismatch, "dense backward received mismatched shapes");
        const std::size_t n_in = inputs(), n_out = outputs();
        Matrix<T> grad_x = need_input_grad ? Matrix<T>(x.rows(), n_in) : Matrix<T>();
        std::vector<T> dz(n_out);
        std::vector<T> transposed(need_input_grad ? n_in * n_out : 0);
        for (std::size_t i = 0; i < n_in && need_input_grad; ++i)
            for (std::size_t j = 0; j < n_out; ++j) transposed[j * n_in + i] = weights(i, j);
        const T* __restrict wt = transposed.data();
        T* __restrict gw = grad.weights.flat().data();
        T* __restrict gb = grad.bias.data();
        T* __restrict d = dz.data();
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const T* __restrict gy = grad_y.row(r).data();
            const T* __restrict out = y.row(r).data();
            for (std::size_t j = 0; j < n_out; ++j)
                d[j] = (activation == Activation::relu && !(out[j] > T{0})) ? T{0} : gy[j];
            for (std::size_t j = 0; j < n_out; ++j) gb[j] += d[j];
            const T* __restrict in = x.row(r).data();
            for (std::size_t i = 0; i < n_in; ++i) {
                const T xi = in[i];
                if (xi == T{0}) continue;
                T* __restrict gwi = gw + i * n_out;
                for (std::size_t j = 0; j < n_out; ++j) gwi[j] += xi * d[j];
            }
            if (!need_input_grad) continue;
            T* __restrict gx = grad_x.row(r).data();
            for (std::size_t j = 0; j < n_out; ++j) {
                const T dj = d[j];
                const T* __restrict wj = wt + j * n_in;
                for (std::size_t i = 0; i < n_in; ++i) gx[i] += wj[i] * dj;
            }
        }
        return grad_x;
    }
};

enum class SegmentReduce { sum, mean, min, max };

/// Maps each of the m̄ input rows to one of `n_segments` output rows. Ids are
/// nondecreasing; segments may be empty.
struct SegmentIndex {
    std::vector<std::uint32_t> ids;
    std::size_t n_segments = 0;

    void validate(std::size_t rows) const {
        if (ids.size() != rows)
            fail(ErrorCode::bad_segment_index, "segment index has " + std::to_string(ids.size()) + " ids for " +
                                                   std::to_string(rows) + " rows");
        for (std::size_t r = 0; r < ids.size(); ++r) {
            if (ids[r] >= n_segments)
                fail(ErrorCode::bad_segment_index, "id " + std::to_string(ids[r]) + " >= " + std::to_string(n_segments));
            if (r > 0 && ids[r] < ids[r - 1]) fail(ErrorCode::bad_segment_index, "segment ids must be nondecreasing");
        }
    }

    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> out(n_segments, 0);
        for (auto id : ids) ++out[id];
        return out;
    }
};

/// Column-wise reduction of each segment. Empty segments produce zeros.
template <typename T>
Matrix<T> segment_aggregate(const Matrix<T>& x, const SegmentIndex& seg, SegmentReduce kind) {
    seg.validate(x.rows());
    Matrix<T> out(seg.n_segments, x.cols(), T{0});
    std::vector<bool> seen(seg.n_segments, false);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto id = seg.ids[r];
        auto dst = out.row(id);
        const auto src = x.row(r);
        if (kind == SegmentReduce::sum || kind == SegmentReduce::mean) {
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        } else if (!seen[id]) {
            std::copy(src.begin(), src.end(), dst.begin());
        } else if (kind == SegmentReduce::min) {
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] < dst[c] ? src[c] : dst[c];
        } else {
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] > dst[c] ? src[c] : dst[c];
        }
        seen[id] = true;
    }
    if (kind == SegmentReduce::mean) {
        const auto sizes = seg.sizes();
        for (std::size_t s = 0; s < seg.n_segments; ++s)
            if (sizes[s] > 0)
                for (auto& v : out.row(s)) v = v / static_cast<T>(sizes[s]);
    }
    return out;
}

/// Exact adjoint of segment_aggregate. Min/max route each column's gradient
/// to the first row attaining the extremum.
template <typename T>
Matrix<T> segment_aggregate_backward(const Matrix<T>& grad_out, const Matrix<T>& x, const SegmentIndex& seg,
                                     SegmentReduce kind) {
    seg.validate(x.rows());
    if (grad_out.rows() != seg.n_segments || grad_out.cols() != x.cols())
        fail(ErrorCode::shape_mismatch, "segment backward gradient has the wrong shape");
    Matrix<T> grad_x(x.rows(), x.cols(), T{0});
    if (kind == SegmentReduce::sum || kind == SegmentReduce::mean) {
        const auto sizes = seg.sizes();
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const auto id = seg.ids[r];
            const T scale = kind == SegmentReduce::mean ? T{1} / static_cast<T>(sizes[id]) : T{1};
            const auto g = grad_out.row(id);
            auto dst = grad_x.row(r);
            for (std::size_t c = 0; c < g.size(); ++c) dst[c] = kind == SegmentReduce::mean ? g[c] * scale : g[c];
        }
        return grad_x;
    }
    const Matrix<T> extremum = segment_aggregate(x, seg, kind);
    Matrix<std::uint8_t> routed(seg.n_segments, x.cols(), 0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto id = seg.ids[r];
        for (std::size_t c = 0; c < x.cols(); ++c) {
            if (routed(id, c) || x(r, c) != extremum(id, c)) continue;
            grad_x(r, c) = grad_out(id, c);
            routed(id, c) = 1;
        }
    }
    return grad_x;
}

template <typename T>
struct HingeResult {
    T loss{0};
    std::vector<T> grad;
};

/// mean_i max(0, 1 - y_i s_i) and its gradient w.r.t. the scores.
template <typename T>
HingeResult<T> hinge_loss(std::span<const T> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) fail(ErrorCode::shape_mismatch, "scores and labels differ in length");
    HingeResult<T> result;
    result.grad.assign(scores.size(), T{0});
    if (scores.empty()) return result;
    const T n = static_cast<T>(scores.size());
    T total{0};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1 && labels[i] != -1) fail(ErrorCode::label_domain, "labels must be -1 or +1");
        const T y = static_cast<T>(labels[i]);
        const T margin = T{1} - y * scores[i];
        if (margin > T{0}) {
            total += margin;
            result.grad[i] = -y / n;
        }
    }
    result.loss = total / n;
    return result;
}

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::vector<std::vector<T>> first;
    std::vector<std::vector<T>> second;
};

/// One bias-corrected Adam update over a list of parameter tensors. Moments
/// are created on the first call.
template <typename T>
void adam_step(AdamState<T>& state, std::span<const std::span<T>> params, std::span<const std::span<const T>> grads) {
    if (params.size() != grads.size()) fail(ErrorCode::shape_mismatch, "adam: parameter and gradient lists differ");
    if (state.first.empty()) {
        for (const auto& p : params) {
            state.first.emplace_back(p.size(), T{0});
            state.second.emplace_back(p.size(), T{0});
        }
    }
    if (state.first.size() != params.size()) fail(ErrorCode::shape_mismatch, "adam: parameter list changed");
    ++state.step;
    const auto& h = state.hyper;
    const double correction1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k];
        auto g = grads[k];
        auto& m = state.first[k];
        auto& v = state.second[k];
        if (p.size() != g.size() || p.size() != m.size()) fail(ErrorCode::shape_mismatch, "adam: tensor shape changed");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (T{1} - b1) * g[i];
            v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
            const double m_hat = static_cast<double>(m[i]) / correction1;
            const double v_hat = static_cast<double>(v[i]) / correction2;
            p[i] -= static_cast<T>(h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon));
        }
    }
}

}  // namespace nrelaggs
