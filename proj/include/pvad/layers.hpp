#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pvad/tensor.hpp"

namespace pvad::nn {

enum class LayerKind { dense, conv2d, conv2d_transpose, attention, layernorm, embedding, gelu };

const char* layer_kind_name(LayerKind k);

template <typename S>
struct Parameter {
    std::string name;
    Tensor<S> value;
    Tensor<S> grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(shape) {}

    void zero_grad() { grad.zero(); }
};

/// Row-wise softmax with max subtraction.
template <typename S>
void softmax_rows_inplace(Tensor<S>& m) {
    check_2d(m, "softmax_rows");
    const std::size_t n = m.dim(0), d = m.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        S* row = m.data() + i * d;
        S mx = row[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        S sum = S(0);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < d; ++j) row[j] /= sum;
    }
}

// ---------------------------------------------------------------------------
// Dense: Y = X * W^T + b, X is (N, d_in).
// ---------------------------------------------------------------------------

template <typename S>
class Dense {
public:
    Dense() = default;
    Dense(std::string name, std::size_t d_in, std::size_t d_out, bool use_bias = true)
        : d_in_(d_in), d_out_(d_out), use_bias_(use_bias),
          w_(name + ".w", {d_out, d_in}) {
        if (use_bias_) b_ = Parameter<S>(name + ".b", {d_out});
    }

    LayerKind kind() const { return LayerKind::dense; }
    std::size_t d_in() const { return d_in_; }
    std::size_t d_out() const { return d_out_; }

    Tensor<S> forward(const Tensor<S>& x) {
        check_2d(x, "dense");
        if (x.dim(1) != d_in_)
            throw ShapeError("dense " + w_.name + ": input " + shape_str(x.shape()) +
                             " does not match weight " + shape_str(w_.value.shape()));
        x_ = x;
        Tensor<S> y = matmul_nt(x, w_.value);
        if (use_bias_) {
            for (std::size_t i = 0; i < y.dim(0); ++i)
                for (std::size_t j = 0; j < d_out_; ++j) y.at(i, j) += b_.value[j];
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        check_2d(dy, "dense backward");
        if (dy.dim(0) != x_.dim(0) || dy.dim(1) != d_out_)
            throw ShapeError("dense " + w_.name + ": upstream grad " + shape_str(dy.shape()) +
                             " does not match output (" + std::to_string(x_.dim(0)) + "x" +
                             std::to_string(d_out_) + ")");
        if (want_grad(w_)) {
            Tensor<S> dw = matmul_tn(dy, x_);
            for (std::size_t i = 0; i < dw.size(); ++i) w_.grad[i] += dw[i];
        }
        if (use_bias_ && want_grad(b_)) {
            for (std::size_t i = 0; i < dy.dim(0); ++i)
                for (std::size_t j = 0; j < d_out_; ++j) b_.grad[j] += dy.at(i, j);
        }
        return matmul(dy, w_.value);
    }

    std::vector<Parameter<S>*> params() {
        std::vector<Parameter<S>*> p{&w_};
        if (use_bias_) p.push_back(&b_);
        return p;
    }

    void set_skip_frozen_param_grads(bool v) { skip_frozen_ = v; }

    Parameter<S>& weight() { return w_; }
    Parameter<S>& bias() { return b_; }

private:
    bool want_grad(const Parameter<S>& p) const { return p.trainable || !skip_frozen_; }

    std::size_t d_in_ = 0, d_out_ = 0;
    bool use_bias_ = true;
    bool skip_frozen_ = false;
    Parameter<S> w_, b_;
    Tensor<S> x_;
};

// ---------------------------------------------------------------------------
// Conv2d: valid padding, square kernel, stride >= 1. Operates on a whole clip
// laid out (T, H, W, C) so one forward caches everything backward needs.
// ---------------------------------------------------------------------------

template <typename S>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t k,
           std::size_t stride)
        : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride),
          w_(name + ".w", {out_ch, k, k, in_ch}), b_(name + ".b", {out_ch}) {}

    LayerKind kind() const { return LayerKind::conv2d; }

    static std::size_t out_extent(std::size_t in, std::size_t k, std::size_t stride) {
        if (in < k) throw ShapeError("conv2d: input extent smaller than kernel");
        return (in - k) / stride + 1;
    }

    Tensor<S> forward(const Tensor<S>& x) {
        if (x.rank() != 4 || x.dim(3) != in_ch_)
            throw ShapeError("conv2d " + w_.name + ": input " + shape_str(x.shape()) +
                             " does not match (T,H,W," + std::to_string(in_ch_) + ")");
        x_ = x;
        const std::size_t t_len = x.dim(0), h = x.dim(1), w = x.dim(2);
        const std::size_t oh = out_extent(h, k_, stride_), ow = out_extent(w, k_, stride_);
        Tensor<S> y({t_len, oh, ow, out_ch_});
        const std::size_t ksz = k_ * k_ * in_ch_;
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    S* out = y.data() + ((t * oh + oy) * ow + ox) * out_ch_;
                    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
                        const S* wp = w_.value.data() + oc * ksz;
                        S acc = b_.value[oc];
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            const S* in = x.data() +
                                ((t * h + oy * stride_ + ky) * w + ox * stride_) * in_ch_;
                            for (std::size_t i = 0; i < k_ * in_ch_; ++i)
                                acc += wp[ky * k_ * in_ch_ + i] * in[i];
                        }
                        out[oc] = acc;
                    }
                }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const std::size_t t_len = x_.dim(0), h = x_.dim(1), w = x_.dim(2);
        const std::size_t oh = out_extent(h, k_, stride_), ow = out_extent(w, k_, stride_);
        if (dy.rank() != 4 || dy.dim(0) != t_len || dy.dim(1) != oh || dy.dim(2) != ow ||
            dy.dim(3) != out_ch_)
            throw ShapeError("conv2d " + w_.name + ": upstream grad " + shape_str(dy.shape()) +
                             " does not match output");
        Tensor<S> dx(x_.shape());
        const std::size_t ksz = k_ * k_ * in_ch_;
        const bool accum_w = w_.trainable || !skip_frozen_;
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const S* g = dy.data() + ((t * oh + oy) * ow + ox) * out_ch_;
                    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
                        const S gv = g[oc];
                        if (gv == S(0)) continue;
                        const S* wp = w_.value.data() + oc * ksz;
                        S* wg = w_.grad.data() + oc * ksz;
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            const std::size_t base =
                                ((t * h + oy * stride_ + ky) * w + ox * stride_) * in_ch_;
                            S* dxp = dx.data() + base;
                            const S* xp = x_.data() + base;
                            const std::size_t row = ky * k_ * in_ch_;
                            for (std::size_t i = 0; i < k_ * in_ch_; ++i)
                                dxp[i] += gv * wp[row + i];
                            if (accum_w)
                                for (std::size_t i = 0; i < k_ * in_ch_; ++i)
                                    wg[row + i] += gv * xp[i];
                        }
                    }
                }
        if (b_.trainable || !skip_frozen_) {
            for (std::size_t i = 0; i < dy.size(); ++i) b_.grad[i % out_ch_] += dy[i];
        }
        return dx;
    }

    std::vector<Parameter<S>*> params() { return {&w_, &b_}; }
    void set_skip_frozen_param_grads(bool v) { skip_frozen_ = v; }
    Parameter<S>& weight() { return w_; }
    Parameter<S>& bias() { return b_; }
    std::size_t kernel() const { return k_; }
    std::size_t stride() const { return stride_; }

private:
    std::size_t in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1;
    bool skip_frozen_ = false;
    Parameter<S> w_, b_;
    Tensor<S> x_;
};

// ---------------------------------------------------------------------------
// Conv2dTranspose: out extent = (in-1)*stride + k. Weight laid out
// (in_ch, k, k, out_ch); each input pixel scatters a k x k patch.
// ---------------------------------------------------------------------------

template <typename S>
class Conv2dTranspose {
public:
    Conv2dTranspose() = default;
    Conv2dTranspose(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t k,
                    std::size_t stride)
        : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride),
          w_(name + ".w", {in_ch, k, k, out_ch}), b_(name + ".b", {out_ch}) {}

    LayerKind kind() const { return LayerKind::conv2d_transpose; }

    static std::size_t out_extent(std::size_t in, std::size_t k, std::size_t stride) {
        return (in - 1) * stride + k;
    }

    Tensor<S> forward(const Tensor<S>& x) {
        if (x.rank() != 4 || x.dim(3) != in_ch_)
            throw ShapeError("conv2d_transpose " + w_.name + ": input " + shape_str(x.shape()) +
                             " does not match (T,h,w," + std::to_string(in_ch_) + ")");
        x_ = x;
        const std::size_t t_len = x.dim(0), h = x.dim(1), w = x.dim(2);
        const std::size_t oh = out_extent(h, k_, stride_), ow = out_extent(w, k_, stride_);
        Tensor<S> y({t_len, oh, ow, out_ch_});
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = b_.value[i % out_ch_];
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t iy = 0; iy < h; ++iy)
                for (std::size_t ix = 0; ix < w; ++ix) {
                    const S* in = x.data() + ((t * h + iy) * w + ix) * in_ch_;
                    for (std::size_t ic = 0; ic < in_ch_; ++ic) {
                        const S v = in[ic];
                        if (v == S(0)) continue;
                        const S* wp = w_.value.data() + ic * k_ * k_ * out_ch_;
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            S* out = y.data() +
                                ((t * oh + iy * stride_ + ky) * ow + ix * stride_) * out_ch_;
                            for (std::size_t i = 0; i < k_ * out_ch_; ++i)
                                out[i] += v * wp[ky * k_ * out_ch_ + i];
                        }
                    }
                }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const std::size_t t_len = x_.dim(0), h = x_.dim(1), w = x_.dim(2);
        const std::size_t oh = out_extent(h, k_, stride_), ow = out_extent(w, k_, stride_);
        if (dy.rank() != 4 || dy.dim(0) != t_len || dy.dim(1) != oh || dy.dim(2) != ow ||
            dy.dim(3) != out_ch_)
            throw ShapeError("conv2d_transpose " + w_.name + ": upstream grad " +
                             shape_str(dy.shape()) + " does not match output");
        Tensor<S> dx(x_.shape());
        const bool accum_w = w_.trainable || !skip_frozen_;
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t iy = 0; iy < h; ++iy)
                for (std::size_t ix = 0; ix < w; ++ix) {
                    const std::size_t in_base = ((t * h + iy) * w + ix) * in_ch_;
                    for (std::size_t ic = 0; ic < in_ch_; ++ic) {
                        const S* wp = w_.value.data() + ic * k_ * k_ * out_ch_;
                        S* wg = w_.grad.data() + ic * k_ * k_ * out_ch_;
                        const S xv = x_[in_base + ic];
                        S acc = S(0);
                        for (std::size_t ky = 0; ky < k_; ++ky) {
                            const S* g = dy.data() +
                                ((t * oh + iy * stride_ + ky) * ow + ix * stride_) * out_ch_;
                            const std::size_t row = ky * k_ * out_ch_;
                            for (std::size_t i = 0; i < k_ * out_ch_; ++i)
                                acc += g[i] * wp[row + i];
                            if (accum_w)
                                for (std::size_t i = 0; i < k_ * out_ch_; ++i)
                                    wg[row + i] += g[i] * xv;
                        }
                        dx[in_base + ic] = acc;
                    }
                }
        if (b_.trainable || !skip_frozen_) {
            for (std::size_t i = 0; i < dy.size(); ++i) b_.grad[i % out_ch_] += dy[i];
        }
        return dx;
    }

    std::vector<Parameter<S>*> params() { return {&w_, &b_}; }
    void set_skip_frozen_param_grads(bool v) { skip_frozen_ = v; }
    Parameter<S>& weight() { return w_; }
    Parameter<S>& bias() { return b_; }

private:
    std::size_t in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1;
    bool skip_frozen_ = false;
    Parameter<S> w_, b_;
    Tensor<S> x_;
};

// ---------------------------------------------------------------------------
// LayerNorm over the last axis of an (N, d) tensor, learnable gain and bias.
// A constant row normalizes to zero (epsilon guards the zero variance).
// ---------------------------------------------------------------------------

template <typename S>
class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(std::string name, std::size_t dim, double eps = 1e-5)
        : dim_(dim), eps_(static_cast<S>(eps)),
          g_(name + ".g", {dim}), b_(name + ".b", {dim}) {
        g_.value.fill(S(1));
    }

    LayerKind kind() const { return LayerKind::layernorm; }

    Tensor<S> forward(const Tensor<S>& x) {
        check_2d(x, "layernorm");
        if (x.dim(1) != dim_)
            throw ShapeError("layernorm " + g_.name + ": input " + shape_str(x.shape()) +
                             " does not match dim " + std::to_string(dim_));
        const std::size_t n = x.dim(0);
        xhat_ = Tensor<S>({n, dim_});
        inv_std_.assign(n, S(0));
        Tensor<S> y({n, dim_});
        for (std::size_t i = 0; i < n; ++i) {
            const S* row = x.data() + i * dim_;
            S mean = S(0);
            for (std::size_t j = 0; j < dim_; ++j) mean += row[j];
            mean /= static_cast<S>(dim_);
            S var = S(0);
            for (std::size_t j = 0; j < dim_; ++j) {
                const S d = row[j] - mean;
                var += d * d;
            }
            var /= static_cast<S>(dim_);
            const S inv = S(1) / std::sqrt(var + eps_);
            inv_std_[i] = inv;
            for (std::size_t j = 0; j < dim_; ++j) {
                const S xh = (row[j] - mean) * inv;
                xhat_.at(i, j) = xh;
                y.at(i, j) = g_.value[j] * xh + b_.value[j];
            }
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const std::size_t n = xhat_.dim(0);
        if (dy.rank() != 2 || dy.dim(0) != n || dy.dim(1) != dim_)
            throw ShapeError("layernorm " + g_.name + ": upstream grad " +
                             shape_str(dy.shape()) + " does not match output");
        Tensor<S> dx({n, dim_});
        const bool accum = g_.trainable || !skip_frozen_;
        for (std::size_t i = 0; i < n; ++i) {
            S mean_dxhat = S(0), mean_dxhat_xhat = S(0);
            for (std::size_t j = 0; j < dim_; ++j) {
                const S dxh = dy.at(i, j) * g_.value[j];
                mean_dxhat += dxh;
                mean_dxhat_xhat += dxh * xhat_.at(i, j);
                if (accum) {
                    g_.grad[j] += dy.at(i, j) * xhat_.at(i, j);
                    b_.grad[j] += dy.at(i, j);
                }
            }
            mean_dxhat /= static_cast<S>(dim_);
            mean_dxhat_xhat /= static_cast<S>(dim_);
            for (std::size_t j = 0; j < dim_; ++j) {
                const S dxh = dy.at(i, j) * g_.value[j];
                dx.at(i, j) = inv_std_[i] * (dxh - mean_dxhat - xhat_.at(i, j) * mean_dxhat_xhat);
            }
        }
        return dx;
    }

    std::vector<Parameter<S>*> params() { return {&g_, &b_}; }
    void set_skip_frozen_param_grads(bool v) { skip_frozen_ = v; }
    Parameter<S>& gain() { return g_; }
    Parameter<S>& bias() { return b_; }

private:
    std::size_t dim_ = 0;
    S eps_ = S(1e-5);
    bool skip_frozen_ = false;
    Parameter<S> g_, b_;
    Tensor<S> xhat_;
    std::vector<S> inv_std_;
};

// ---------------------------------------------------------------------------
// GELU (exact erf form), elementwise over any shape.
// ---------------------------------------------------------------------------

template <typename S>
class Gelu {
public:
    LayerKind kind() const { return LayerKind::gelu; }

    Tensor<S> forward(const Tensor<S>& x) {
        x_ = x;
        Tensor<S> y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * cdf(x[i]);
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        if (dy.size() != x_.size())
            throw ShapeError("gelu: upstream grad " + shape_str(dy.shape()) +
                             " does not match input " + shape_str(x_.shape()));
        Tensor<S> dx(x_.shape());
        for (std::size_t i = 0; i < x_.size(); ++i) {
            const S x = x_[i];
            dx[i] = dy[i] * (cdf(x) + x * pdf(x));
        }
        return dx;
    }

    std::vector<Parameter<S>*> params() { return {}; }

private:
    static S cdf(S x) { return S(0.5) * (S(1) + std::erf(x * S(0.70710678118654752440))); }
    static S pdf(S x) { return std::exp(S(-0.5) * x * x) * S(0.39894228040143267794); }
    Tensor<S> x_;
};

// ---------------------------------------------------------------------------
// Embedding: integer indices -> rows of a learnable table.
// ---------------------------------------------------------------------------

template <typename S>
class Embedding {
public:
    Embedding() = default;
    Embedding(std::string name, std::size_t num, std::size_t dim)
        : num_(num), dim_(dim), table_(name + ".table", {num, dim}) {}

    LayerKind kind() const { return LayerKind::embedding; }

    Tensor<S> forward(const std::vector<std::size_t>& indices) {
        for (auto ix : indices)
            if (ix >= num_)
                throw ShapeError("embedding " + table_.name + ": index " + std::to_string(ix) +
                                 " out of range [0," + std::to_string(num_) + ")");
        indices_ = indices;
        Tensor<S> y({indices.size(), dim_});
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t j = 0; j < dim_; ++j) y.at(i, j) = table_.value.at(indices[i], j);
        return y;
    }

    void backward(const Tensor<S>& dy) {
        if (dy.rank() != 2 || dy.dim(0) != indices_.size() || dy.dim(1) != dim_)
            throw ShapeError("embedding " + table_.name + ": upstream grad " +
                             shape_str(dy.shape()) + " does not match output");
        if (!table_.trainable && skip_frozen_) return;
        for (std::size_t i = 0; i < indices_.size(); ++i)
            for (std::size_t j = 0; j < dim_; ++j)
                table_.grad.at(indices_[i], j) += dy.at(i, j);
    }

    std::vector<Parameter<S>*> params() { return {&table_}; }
    void set_skip_frozen_param_grads(bool v) { skip_frozen_ = v; }
    Parameter<S>& table() { return table_; }

private:
    std::size_t num_ = 0, dim_ = 0;
    bool skip_frozen_ = false;
    Parameter<S> table_;
    std::vector<std::size_t> indices_;
};

// ---------------------------------------------------------------------------
// Low-rank adapter state for a projection: W x + (alpha/rank) * B (A x).
// B starts at zero so a freshly wrapped projection equals its base map.
// ---------------------------------------------------------------------------

template <typename S>
struct LoraAdapter {
    Parameter<S> a;  // (rank, d_in)
    Parameter<S> b;  // (d_out, rank)
    std::size_t rank = 0;
    double alpha = 0.0;

    LoraAdapter() = default;
    LoraAdapter(const std::string& name, std::size_t d_in, std::size_t d_out, std::size_t r,
                double alpha_in)
        : a(name + ".lora_a", {r, d_in}), b(name + ".lora_b", {d_out, r}),
          rank(r), alpha(alpha_in) {}

    S scale() const { return static_cast<S>(alpha / static_cast<double>(rank)); }
};

/// Linear projection with an optional low-rank adapter, used inside attention.
template <typename S>
class Projection {
public:
    Projection() = default;
    Projection(std::string name, std::size_t d_in, std::size_t d_out)
        : name_(std::move(name)), w_(name_ + ".w", {d_out, d_in}) {}

    Tensor<S> forward(const Tensor<S>& x) {
        x_ = x;
        Tensor<S> y = matmul_nt(x, w_.value);
        if (adapter_) {
            h_ = matmul_nt(x, adapter_->a.value);  // (N, rank)
            const S c = adapter_->scale();
            Tensor<S> ya = matmul_nt(h_, adapter_->b.value);
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * ya[i];
        }
        return y;
    }

    /// Returns dX; accumulates dW (and adapter grads when present).
    Tensor<S> backward(const Tensor<S>& dy, bool skip_frozen) {
        if (w_.trainable || !skip_frozen) {
            Tensor<S> dw = matmul_tn(dy, x_);
            for (std::size_t i = 0; i < dw.size(); ++i) w_.grad[i] += dw[i];
        }
        Tensor<S> dx = matmul(dy, w_.value);
        if (adapter_) {
            const S c = adapter_->scale();
            Tensor<S> dh = matmul(dy, adapter_->b.value);  // (N, rank)
            for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= c;
            if (adapter_->b.trainable || !skip_frozen) {
                Tensor<S> db = matmul_tn(dy, h_);
                for (std::size_t i = 0; i < db.size(); ++i) adapter_->b.grad[i] += c * db[i];
            }
            if (adapter_->a.trainable || !skip_frozen) {
                Tensor<S> da = matmul_tn(dh, x_);
                for (std::size_t i = 0; i < da.size(); ++i) adapter_->a.grad[i] += da[i];
            }
            Tensor<S> dxa = matmul(dh, adapter_->a.value);
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxa[i];
        }
        return dx;
    }

    void install_adapter(std::size_t rank, double alpha) {
        if (adapter_) throw ConfigError("projection " + name_ + " is already adapted");
        adapter_ = std::make_unique<LoraAdapter<S>>(name_, w_.value.dim(1), w_.value.dim(0),
                                                    rank, alpha);
    }
    bool has_adapter() const { return adapter_ != nullptr; }
    LoraAdapter<S>& adapter() { return *adapter_; }

    /// Bakes (alpha/rank) * B * A into the base weight and drops the adapter.
    void merge_adapter() {
        if (!adapter_) return;
        const S c = adapter_->scale();
        Tensor<S> delta = matmul(adapter_->b.value, adapter_->a.value);  // (d_out, d_in)
        for (std::size_t i = 0; i < w_.value.size(); ++i) w_.value[i] += c * delta[i];
        adapter_.reset();
    }

    std::vector<Parameter<S>*> params() {
        std::vector<Parameter<S>*> p{&w_};
        if (adapter_) {
            p.push_back(&adapter_->a);
            p.push_back(&adapter_->b);
        }
        return p;
    }

    Parameter<S>& weight() { return w_; }
    const std::string& name() const { return name_; }

private:
    std::string name_;
    Parameter<S> w_;
    std::unique_ptr<LoraAdapter<S>> adapter_;
    Tensor<S> x_, h_;
};

// ---------------------------------------------------------------------------
// Single-head self-attention over the temporal axis of an (T, d) input:
// softmax(q k^T / sqrt(d)) v with q = X Wq^T, k = X Wk^T, v = X Wv^T.
// ---------------------------------------------------------------------------

template <typename S>
class Attention {
public:
    Attention() = default;
    Attention(std::string name, std::size_t dim)
        : dim_(dim),
          q_(name + ".q", dim, dim), k_(name + ".k", dim, dim), v_(name + ".v", dim, dim) {}

    LayerKind kind() const { return LayerKind::attention; }
    std::size_t dim() const { return dim_; }

    Tensor<S> forward(const Tensor<S>& x) {
        check_2d(x, "attention");
        if (x.dim(1) != dim_)
            throw ShapeError("attention " + q_.name() + ": input " + shape_str(x.shape()) +
                             " does not match dim " + std::to_string(dim_));
        q_out_ = q_.forward(x);
        k_out_ = k_.forward(x);
        v_out_ = v_.forward(x);
        attn_ = matmul_nt(q_out_, k_out_);
        const S scale = S(1) / std::sqrt(static_cast<S>(dim_));
        for (std::size_t i = 0; i < attn_.size(); ++i) attn_[i] *= scale;
        softmax_rows_inplace(attn_);
        return matmul(attn_, v_out_);
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const std::size_t t_len = attn_.dim(0);
        if (dy.rank() != 2 || dy.dim(0) != t_len || dy.dim(1) != dim_)
            throw ShapeError("attention " + q_.name() + ": upstream grad " +
                             shape_str(dy.shape()) + " does not match output");
        Tensor<S> dv = matmul_tn(attn_, dy);
        Tensor<S> dattn = matmul_nt(dy, v_out_);
        // Softmax rows backward.
        Tensor<S> dscore({t_len, t_len});
        for (std::size_t i = 0; i < t_len; ++i) {
            S dot = S(0);
            for (std::size_t j = 0; j < t_len; ++j) dot += dattn.at(i, j) * attn_.at(i, j);
            for (std::size_t j = 0; j < t_len; ++j)
                dscore.at(i, j) = attn_.at(i, j) * (dattn.at(i, j) - dot);
        }
        const S scale = S(1) / std::sqrt(static_cast<S>(dim_));
        for (std::size_t i = 0; i < dscore.size(); ++i) dscore[i] *= scale;
        Tensor<S> dq = matmul(dscore, k_out_);
        Tensor<S> dk = matmul_tn(dscore, q_out_);
        Tensor<S> dx = q_.backward(dq, skip_frozen_);
        Tensor<S> dxk = k_.backward(dk, skip_frozen_);
        Tensor<S> dxv = v_.backward(dv, skip_frozen_);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxk[i] + dxv[i];
        return dx;
    }

    std::vector<Parameter<S>*> params() {
        std::vector<Parameter<S>*> p;
        for (auto* proj : {&q_, &k_, &v_})
            for (auto* pp : proj->params()) p.push_back(pp);
        return p;
    }

    void set_skip_frozen_param_grads(bool v) { skip_frozen_ = v; }
    Projection<S>& q_proj() { return q_; }
    Projection<S>& k_proj() { return k_; }
    Projection<S>& v_proj() { return v_; }

private:
    std::size_t dim_ = 0;
    bool skip_frozen_ = false;
    Projection<S> q_, k_, v_;
    Tensor<S> q_out_, k_out_, v_out_, attn_;
};

}  // namespace pvad::nn
