#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pvad/common.hpp"
#include "pvad/rng.hpp"

namespace pvad::nn {

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ")";
    return os.str();
}

/// Dense row-major tensor. S is float or double; gradient checks use double.
template <typename S>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), S(0));
    }
    Tensor(std::initializer_list<std::size_t> shape)
        : Tensor(std::vector<std::size_t>(shape)) {}
    Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<S> values)
        : shape_(shape), data_(values) {
        if (count(shape_) != data_.size())
            throw ShapeError("tensor: " + std::to_string(data_.size()) +
                             " values do not fill " + shape_str(shape_));
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    S& operator[](std::size_t i) { return data_[i]; }
    const S& operator[](std::size_t i) const { return data_[i]; }

    S& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const S& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    void fill(S v) { data_.assign(data_.size(), v); }
    void zero() { fill(S(0)); }

    /// Reinterpret with a new shape of identical element count.
    void reshape(std::vector<std::size_t> shape) {
        if (count(shape) != data_.size())
            throw ShapeError("reshape: element count mismatch, have " +
                             shape_str(shape_) + ", want " + shape_str(shape));
        shape_ = std::move(shape);
    }

    void fill_uniform(StreamRng& rng, double lo, double hi) {
        for (auto& v : data_) v = static_cast<S>(rng.next_uniform(lo, hi));
    }
    void fill_normal(StreamRng& rng, double mean, double stddev) {
        for (auto& v : data_) v = static_cast<S>(mean + stddev * rng.next_normal());
    }

    bool all_finite() const {
        for (const auto& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
        return out;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<S> data_;
};

template <typename S>
void check_2d(const Tensor<S>& t, const char* who) {
    if (t.rank() != 2)
        throw ShapeError(std::string(who) + ": expected a 2-d tensor, got " + shape_str(t.shape()));
}

/// C = A * B for 2-d tensors (rows_a x k) * (k x cols_b).
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    check_2d(a, "matmul lhs");
    check_2d(b, "matmul rhs");
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    Tensor<S> c({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const S* arow = a.data() + i * k;
        S* crow = c.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const S av = arow[p];
            if (av == S(0)) continue;
            const S* brow = b.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// C = A * B^T.
template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
    check_2d(a, "matmul_nt lhs");
    check_2d(b, "matmul_nt rhs");
    if (a.dim(1) != b.dim(1))
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
    Tensor<S> c({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const S* arow = a.data() + i * k;
        S* crow = c.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            const S* brow = b.data() + j * k;
            S acc = S(0);
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
    return c;
}

/// C = A^T * B.
template <typename S>
Tensor<S> matmul_tn(const Tensor<S>& a, const Tensor<S>& b) {
    check_2d(a, "matmul_tn lhs");
    check_2d(b, "matmul_tn rhs");
    if (a.dim(0) != b.dim(0))
        throw ShapeError("matmul_tn: inner dimensions differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    const std::size_t k = a.dim(0), n = a.dim(1), m = b.dim(1);
    Tensor<S> c({n, m});
    for (std::size_t p = 0; p < k; ++p) {
        const S* arow = a.data() + p * n;
        const S* brow = b.data() + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            const S av = arow[i];
            if (av == S(0)) continue;
            S* crow = c.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

}  // namespace pvad::nn
