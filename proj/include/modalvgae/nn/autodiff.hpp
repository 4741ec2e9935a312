#pragma once

/**
 * @file autodiff.hpp
 * @brief Reverse-mode automatic differentiation over dense matrices.
 *
 * A Tape records every operation of one forward pass. Values and gradients
 * are Eigen matrices; vectors are 1 x n row matrices. Calling backward() on
 * a scalar (1 x 1) node propagates gradients to every node that feeds it.
 * Templated on the scalar so that the same graph runs in float for
 * training and in double for finite-difference checks.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"

namespace mvgae::ad {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
class Tape;

/// Handle to a node on a tape.
template <class T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Mat<T>& value() const { return tape->value(id); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    T scalar() const { return value()(0, 0); }
    bool valid() const { return tape != nullptr && id >= 0; }
};

/// Mean-aggregation neighbourhoods of a directed edge list.
struct Neighbourhood {
    /// in_nbrs[i] = sources j of edges j -> i.
    std::vector<std::vector<std::uint32_t>> in_nbrs;

    Neighbourhood() = default;
    Neighbourhood(int n_nodes, const std::vector<std::array<std::uint32_t, 2>>& edges) : in_nbrs(static_cast<std::size_t>(n_nodes)) {
        for (const auto& e : edges) {
            if (static_cast<int>(e[0]) >= n_nodes || static_cast<int>(e[1]) >= n_nodes) {
                throw InvalidArgument("Neighbourhood: edge index out of range");
            }
            in_nbrs[e[1]].push_back(e[0]);
        }
    }
    int size() const { return static_cast<int>(in_nbrs.size()); }
};

template <class T>
class Tape {
public:
    using Backward = std::function<void(Tape&, int)>;

    struct Node {
        Mat<T> value;
        Mat<T> grad;
        Backward backward;
        bool needs_grad = false;
        int param_index = -1;
    };

    Tape() { nodes_.reserve(256); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Constant input; gradients are not tracked.
    Var<T> constant(Mat<T> v) { return push(std::move(v), nullptr, false); }

    /// Trainable leaf tied to a parameter slot; its gradient is collected by param_grads().
    Var<T> parameter(const Mat<T>& v, int param_index) {
        auto var = push(v, nullptr, true);
        nodes_[static_cast<std::size_t>(var.id)].param_index = param_index;
        return var;
    }

    /// Differentiable leaf not tied to a parameter (used by tests).
    Var<T> variable(Mat<T> v) { return push(std::move(v), nullptr, true); }

    Var<T> push(Mat<T> v, Backward bw, bool needs_grad) {
        Node n;
        n.value = std::move(v);
        n.backward = std::move(bw);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    const Mat<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    const Mat<T>& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    const Mat<T>& grad(Var<T> v) const { return grad(v.id); }
    bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() > 0; }

    /// Adds g into the gradient of node id (allocating on first use).
    template <class Derived>
    void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
        auto& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

    /// Propagates d(out)/d(node) for every node; out must be 1 x 1.
    void backward(Var<T> out) {
        if (out.rows() != 1 || out.cols() != 1) throw InvalidArgument("Tape::backward: output must be scalar");
        if (!needs_grad(out.id)) return;
        nodes_[static_cast<std::size_t>(out.id)].grad = Mat<T>::Ones(1, 1);
        for (int i = out.id; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward && n.grad.size() > 0) n.backward(*this, i);
        }
    }

    /// Calls fn(param_index, grad) for every parameter leaf that received a gradient.
    template <class Fn>
    void param_grads(Fn&& fn) const {
        for (const auto& n : nodes_) {
            if (n.param_index >= 0 && n.grad.size() > 0) fn(n.param_index, n.grad);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

namespace detail {

template <class T>
bool any_grad(const Tape<T>& t, std::initializer_list<int> ids) {
    for (int id : ids) {
        if (t.needs_grad(id)) return true;
    }
    return false;
}

template <class T>
void check_same_tape(Var<T> a, Var<T> b) {
    if (a.tape != b.tape) throw InvalidArgument("autodiff: operands live on different tapes");
}

inline void check_shape(bool ok, const char* op, Eigen::Index r1, Eigen::Index c1, Eigen::Index r2, Eigen::Index c2) {
    if (!ok) {
        throw InvalidArgument(std::string("autodiff ") + op + ": shape mismatch (" + std::to_string(r1) + "x" +
                              std::to_string(c1) + " vs " + std::to_string(r2) + "x" + std::to_string(c2) + ")");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    detail::check_shape(a.cols() == b.rows(), "matmul", a.rows(), a.cols(), b.rows(), b.cols());
    auto& t = *a.tape;
    Mat<T> v = a.value() * b.value();
    const int ia = a.id, ib = b.id;
    return t.push(std::move(v), [ia, ib](Tape<T>& tp, int self) {
        const auto& g = tp.grad(self);
        if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
        if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
    }, detail::any_grad(t, {ia, ib}));
}

/// aᵀ b.
template <class T>
Var<T> tmatmul(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    detail::check_shape(a.rows() == b.rows(), "tmatmul", a.rows(), a.cols(), b.rows(), b.cols());
    auto& t = *a.tape;
    Mat<T> v = a.value().transpose() * b.value();
    const int ia = a.id, ib = b.id;
    return t.push(std::move(v), [ia, ib](Tape<T>& tp, int self) {
        const auto& g = tp.grad(self);
        if (tp.needs_grad(ia)) tp.accumulate(ia, tp.value(ib) * g.transpose());
        if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia) * g);
    }, detail::any_grad(t, {ia, ib}));
}

/// x W + 1 bᵀ with b a 1 x out row (bias may be invalid for no bias).
template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b = {}) {
    detail::check_shape(x.cols() == w.rows(), "linear", x.rows(), x.cols(), w.rows(), w.cols());
    auto& t = *x.tape;
    Mat<T> v = x.value() * w.value();
    const bool has_bias = b.valid();
    if (has_bias) {
        detail::check_shape(b.rows() == 1 && b.cols() == w.cols(), "linear bias", b.rows(), b.cols(), 1, w.cols());
        v.rowwise() += b.value().row(0);
    }
    const int ix = x.id, iw = w.id, ib = has_bias ? b.id : -1;
    const bool ng = detail::any_grad(t, {ix, iw}) || (has_bias && t.needs_grad(ib));
    return t.push(std::move(v), [ix, iw, ib](Tape<T>& tp, int self) {
        const auto& g = tp.grad(self);
        if (tp.needs_grad(ix)) tp.accumulate(ix, g * tp.value(iw).transpose());
        if (tp.needs_grad(iw)) tp.accumulate(iw, tp.value(ix).transpose() * g);
        if (ib >= 0 && tp.needs_grad(ib)) tp.accumulate(ib, g.colwise().sum());
    }, ng);
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    detail::check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.rows(), a.cols(), b.rows(), b.cols());
    auto& t = *a.tape;
    Mat<T> v = a.value() + b.value();
    const int ia = a.id, ib = b.id;
    return t.push(std::move(v), [ia, ib](Tape<T>& tp, int self) {
        tp.accumulate(ia, tp.grad(self));
        tp.accumulate(ib, tp.grad(self));
    }, detail::any_grad(t, {ia, ib}));
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    detail::check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.rows(), a.cols(), b.rows(), b.cols());
    auto& t = *a.tape;
    Mat<T> v = a.value() - b.value();
    const int ia = a.id, ib = b.id;
    return t.push(std::move(v), [ia, ib](Tape<T>& tp, int self) {
        tp.accumulate(ia, tp.grad(self));
        if (tp.needs_grad(ib)) tp.accumulate(ib, -tp.grad(self));
    }, detail::any_grad(t, {ia, ib}));
}

/// Element-wise product.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    detail::check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a.rows(), a.cols(), b.rows(), b.cols());
    auto& t = *a.tape;
    Mat<T> v = a.value().cwiseProduct(b.value());
    const int ia = a.id, ib = b.id;
    return t.push(std::move(v), [ia, ib](Tape<T>& tp, int self) {
        const auto& g = tp.grad(self);
        if (tp.needs_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
        if (tp.needs_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
    }, detail::any_grad(t, {ia, ib}));
}

template <class T>
Var<T> scale(Var<T> a, T s) {
    auto& t = *a.tape;
    Mat<T> v = a.value() * s;
    const int ia = a.id;
    return t.push(std::move(v), [ia, s](Tape<T>& tp, int self) { tp.accumulate(ia, tp.grad(self) * s); },
                  t.needs_grad(ia));
}

template <class T>
Var<T> add_scalar(Var<T> a, T s) {
    auto& t = *a.tape;
    Mat<T> v = a.value().array() + s;
    const int ia = a.id;
    return t.push(std::move(v), [ia](Tape<T>& tp, int self) { tp.accumulate(ia, tp.grad(self)); }, t.needs_grad(ia));
}

/// Sum of all entries (1 x 1).
template <class T>
Var<T> sum(Var<T> a) {
    auto& t = *a.tape;
    Mat<T> v(1, 1);
    v(0, 0) = a.value().sum();
    const int ia = a.id;
    const auto r = a.rows(), c = a.cols();
    return t.push(std::move(v), [ia, r, c](Tape<T>& tp, int self) {
        tp.accumulate(ia, Mat<T>::Constant(r, c, tp.grad(self)(0, 0)));
    }, t.needs_grad(ia));
}

/// Σ w_k s_k over 1 x 1 scalars.
template <class T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights) {
    if (terms.empty() || terms.size() != weights.size()) throw InvalidArgument("weighted_sum: size mismatch");
    auto& t = *terms.front().tape;
    Mat<T> v = Mat<T>::Zero(1, 1);
    std::vector<int> ids;
    bool ng = false;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        v(0, 0) += weights[k] * terms[k].scalar();
        ids.push_back(terms[k].id);
        ng = ng || t.needs_grad(terms[k].id);
    }
    return t.push(std::move(v), [ids, weights](Tape<T>& tp, int self) {
        const T g = tp.grad(self)(0, 0);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (tp.needs_grad(ids[k])) tp.accumulate(ids[k], Mat<T>::Constant(1, 1, g * weights[k]));
        }
    }, ng);
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <class T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
    detail::check_same_tape(a, b);
    detail::check_shape(a.rows() == b.rows(), "concat_cols", a.rows(), a.cols(), b.rows(), b.cols());
    auto& t = *a.tape;
    Mat<T> v(a.rows(), a.cols() + b.cols());
    v << a.value(), b.value();
    const int ia = a.id, ib = b.id;
    const auto ca = a.cols(), cb = b.cols();
    return t.push(std::move(v), [ia, ib, ca, cb](Tape<T>& tp, int self) {
        const auto& g = tp.grad(self);
        if (tp.needs_grad(ia)) tp.accumulate(ia, g.leftCols(ca));
        if (tp.needs_grad(ib)) tp.accumulate(ib, g.rightCols(cb));
    }, detail::any_grad(t, {ia, ib}));
}

template <class T>
Var<T> slice_cols(Var<T> a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) throw InvalidArgument("slice_cols: range out of bounds");
    auto& t = *a.tape;
    Mat<T> v = a.value().middleCols(start, count);
    const int ia = a.id;
    const auto r = a.rows(), c = a.cols();
    return t.push(std::move(v), [ia, r, c, start, count](Tape<T>& tp, int self) {
        Mat<T> g = Mat<T>::Zero(r, c);
        g.middleCols(start, count) = tp.grad(self);
        tp.accumulate(ia, g);
    }, t.needs_grad(ia));
}

/// Broadcasts a 1 x d row to n identical rows.
template <class T>
Var<T> repeat_rows(Var<T> row, Eigen::Index n) {
    if (row.rows() != 1) throw InvalidArgument("repeat_rows: input must be a single row");
    auto& t = *row.tape;
    Mat<T> v = row.value().replicate(n, 1);
    const int ir = row.id;
    return t.push(std::move(v), [ir](Tape<T>& tp, int self) { tp.accumulate(ir, tp.grad(self).colwise().sum()); },
                  t.needs_grad(ir));
}

// ---------------------------------------------------------------------------
// Element-wise nonlinearities
// ---------------------------------------------------------------------------

/// GELU, x Φ(x) with the exact normal CDF.
template <class T>
Var<T> gelu(Var<T> a) {
    auto& t = *a.tape;
    const auto& x = a.value();
    Mat<T> v(x.rows(), x.cols());
    Mat<T> d(x.rows(), x.cols());
    const T inv_sqrt2 = T(1) / std::sqrt(T(2));
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const T xi = x.data()[i];
        const T cdf = T(0.5) * (T(1) + std::erf(xi * inv_sqrt2));
        v.data()[i] = xi * cdf;
        d.data()[i] = cdf + xi * inv_sqrt2pi * std::exp(T(-0.5) * xi * xi);
    }
    const int ia = a.id;
    return t.push(std::move(v), [ia, d = std::move(d)](Tape<T>& tp, int self) {
        tp.accumulate(ia, tp.grad(self).cwiseProduct(d));
    }, t.needs_grad(ia));
}

/// Numerically stable log(1 + e^x).
template <class T>
T softplus_value(T x) {
    return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <class T>
T sigmoid_value(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
Var<T> softplus(Var<T> a) {
    auto& t = *a.tape;
    Mat<T> v = a.value().unaryExpr([](T x) { return softplus_value(x); });
    const int ia = a.id;
    return t.push(std::move(v), [ia](Tape<T>& tp, int self) {
        tp.accumulate(ia, tp.grad(self).cwiseProduct(tp.value(ia).unaryExpr([](T x) { return sigmoid_value(x); })));
    }, t.needs_grad(ia));
}

template <class T>
Var<T> exp(Var<T> a) {
    auto& t = *a.tape;
    Mat<T> v = a.value().array().exp();
    const int ia = a.id;
    return t.push(std::move(v), [ia](Tape<T>& tp, int self) {
        tp.accumulate(ia, tp.grad(self).cwiseProduct(tp.value(self)));
    }, t.needs_grad(ia));
}

/**
 * Inverted dropout: zeroes each entry with probability p and scales the
 * rest by 1 / (1 - p). Identity when p == 0 or rng is null.
 */
template <class T>
Var<T> dropout(Var<T> a, double p, Rng* rng) {
    if (p <= 0.0 || rng == nullptr) return a;
    if (p >= 1.0) throw InvalidArgument("dropout: rate must be < 1");
    auto& t = *a.tape;
    Mat<T> mask(a.rows(), a.cols());
    const T keep_scale = T(1) / T(1 - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < p ? T(0) : keep_scale;
    Mat<T> v = a.value().cwiseProduct(mask);
    const int ia = a.id;
    return t.push(std::move(v), [ia, mask = std::move(mask)](Tape<T>& tp, int self) {
        tp.accumulate(ia, tp.grad(self).cwiseProduct(mask));
    }, t.needs_grad(ia));
}

// ---------------------------------------------------------------------------
// Graph operations
// ---------------------------------------------------------------------------

/// Row i of the output is the mean of rows {i} ∪ in-neighbours(i).
template <class T>
Var<T> mean_aggregate(Var<T> h, const Neighbourhood& nb) {
    if (h.rows() != nb.size()) {
        throw InvalidArgument("mean_aggregate: feature rows (" + std::to_string(h.rows()) + ") != node count (" +
                              std::to_string(nb.size()) + ")");
    }
    auto& t = *h.tape;
    const auto& x = h.value();
    Mat<T> v(x.rows(), x.cols());
    for (int i = 0; i < nb.size(); ++i) {
        const auto& nbrs = nb.in_nbrs[static_cast<std::size_t>(i)];
        auto row = v.row(i);
        row = x.row(i);
        for (auto j : nbrs) row += x.row(j);
        row /= static_cast<T>(nbrs.size() + 1);
    }
    const int ih = h.id;
    return t.push(std::move(v), [ih, &nb](Tape<T>& tp, int self) {
        const auto& g = tp.grad(self);
        Mat<T> gi = Mat<T>::Zero(g.rows(), g.cols());
        for (int i = 0; i < nb.size(); ++i) {
            const auto& nbrs = nb.in_nbrs[static_cast<std::size_t>(i)];
            const T w = T(1) / static_cast<T>(nbrs.size() + 1);
            gi.row(i) += w * g.row(i);
            for (auto j : nbrs) gi.row(j) += w * g.row(i);
        }
        tp.accumulate(ih, gi);
    }, t.needs_grad(ih));
}

/// Softmax over the entries of an n x 1 column.
template <class T>
Var<T> softmax_col(Var<T> s) {
    if (s.cols() != 1 || s.rows() < 1) throw InvalidArgument("softmax_col: input must be a non-empty column");
    auto& t = *s.tape;
    const auto& x = s.value();
    const T mx = x.maxCoeff();
    Mat<T> v = (x.array() - mx).exp().matrix();
    v /= v.sum();
    const int is = s.id;
    return t.push(std::move(v), [is](Tape<T>& tp, int self) {
        const auto& w = tp.value(self);
        const auto& g = tp.grad(self);
        const T dot = w.cwiseProduct(g).sum();
        tp.accumulate(is, w.cwiseProduct((g.array() - dot).matrix()));
    }, t.needs_grad(is));
}

}  // namespace mvgae::ad
