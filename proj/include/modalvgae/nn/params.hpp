#pragma once

/**
 * @file params.hpp
 * @brief Named parameter trees and their per-forward tape bindings.
 */

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "modalvgae/core/errors.hpp"
#include "modalvgae/core/rng.hpp"
#include "modalvgae/nn/autodiff.hpp"

namespace mvgae::nn {

using ad::Mat;

/// Optimizer parameter groups with separate learning rates.
enum class ParamGroup { Backbone, Head };

inline const char* to_string(ParamGroup g) { return g == ParamGroup::Head ? "head" : "backbone"; }

template <class T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Mat<T> value;
        ParamGroup group = ParamGroup::Backbone;
    };

    int add(const std::string& name, Mat<T> value, ParamGroup group = ParamGroup::Backbone) {
        if (index_.count(name)) throw InvalidArgument("ParamStore: duplicate parameter '" + name + "'");
        index_[name] = static_cast<int>(entries_.size());
        entries_.push_back(Entry{name, std::move(value), group});
        return static_cast<int>(entries_.size()) - 1;
    }

    /// Glorot-uniform weight matrix scaled by `gain`.
    int add_weight(const std::string& name, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng,
                   ParamGroup group = ParamGroup::Backbone, double gain = 1.0) {
        const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Mat<T> w(fan_in, fan_out);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
        return add(name, std::move(w), group);
    }

    int add_bias(const std::string& name, Eigen::Index width, ParamGroup group = ParamGroup::Backbone) {
        return add(name, Mat<T>::Zero(1, width), group);
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw InvalidArgument("ParamStore: unknown parameter '" + name + "'");
        return it->second;
    }

    Mat<T>& operator[](const std::string& name) { return entries_[static_cast<std::size_t>(index_of(name))].value; }
    const Mat<T>& operator[](const std::string& name) const {
        return entries_[static_cast<std::size_t>(index_of(name))].value;
    }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t count() const { return entries_.size(); }

    /// Total number of scalar parameters.
    Eigen::Index size() const {
        Eigen::Index n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    /// All values concatenated in entry order (column-major within each entry).
    Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(size());
        Eigen::Index k = 0;
        for (const auto& e : entries_) {
            for (Eigen::Index i = 0; i < e.value.size(); ++i) out[k++] = static_cast<double>(e.value.data()[i]);
        }
        return out;
    }

    void unflatten(const Eigen::VectorXd& flat) {
        if (flat.size() != size()) throw InvalidArgument("ParamStore::unflatten: size mismatch");
        Eigen::Index k = 0;
        for (auto& e : entries_) {
            for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = static_cast<T>(flat[k++]);
        }
    }

    template <class U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>(), e.group);
        return out;
    }

    bool all_finite() const {
        for (const auto& e : entries_) {
            if (!e.value.allFinite()) return false;
        }
        return true;
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, int> index_;
};

/// Gradient buffers aligned with a ParamStore's entries.
template <class T>
struct Gradients {
    std::vector<Mat<T>> values;

    Gradients() = default;
    explicit Gradients(const ParamStore<T>& store) { reset(store); }

    void reset(const ParamStore<T>& store) {
        values.clear();
        for (const auto& e : store.entries()) values.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
    }

    void set_zero() {
        for (auto& v : values) v.setZero();
    }

    /// Collects parameter gradients from a tape after backward().
    void accumulate_from(const ad::Tape<T>& tape, T weight = T(1)) {
        tape.param_grads([&](int idx, const Mat<T>& g) { values[static_cast<std::size_t>(idx)] += weight * g; });
    }

    void add(const Gradients& other, T weight = T(1)) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += weight * other.values[i];
    }

    double squared_norm() const {
        double s = 0.0;
        for (const auto& v : values) s += static_cast<double>(v.squaredNorm());
        return s;
    }

    bool all_finite() const {
        for (const auto& v : values) {
            if (!v.allFinite()) return false;
        }
        return true;
    }
};

/// Lazily places parameters of a store onto a tape, one leaf per parameter.
template <class T>
class Binding {
public:
    Binding(ad::Tape<T>& tape, const ParamStore<T>& store) : tape_(tape), store_(store), vars_(store.count()) {}

    ad::Var<T> operator()(const std::string& name) {
        const int idx = store_.index_of(name);
        auto& v = vars_[static_cast<std::size_t>(idx)];
        if (!v.valid()) v = tape_.parameter(store_.entries()[static_cast<std::size_t>(idx)].value, idx);
        return v;
    }

    ad::Tape<T>& tape() { return tape_; }
    const ParamStore<T>& store() const { return store_; }

private:
    ad::Tape<T>& tape_;
    const ParamStore<T>& store_;
    std::vector<ad::Var<T>> vars_;
};

}  // namespace mvgae::nn
