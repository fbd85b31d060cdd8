#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pvad/layers.hpp"

namespace pvad::nn {

/// Adam with bias correction. Frozen parameters are skipped entirely, so
/// their moment buffers never drift and their values stay bit-identical.
template <typename S>
class Adam {
public:
    explicit Adam(std::vector<Parameter<S>*> params, double lr = 1e-4, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (auto* p : params_) {
            m_.emplace_back(std::vector<S>(p->value.size(), S(0)));
            v_.emplace_back(std::vector<S>(p->value.size(), S(0)));
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Parameter<S>& p = *params_[i];
            if (!p.trainable) continue;
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const double g = static_cast<double>(p.grad[j]);
                double m = static_cast<double>(m_[i][j]);
                double v = static_cast<double>(v_[i][j]);
                m = beta1_ * m + (1.0 - beta1_) * g;
                v = beta2_ * v + (1.0 - beta2_) * g * g;
                m_[i][j] = static_cast<S>(m);
                v_[i][j] = static_cast<S>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p.value[j] -= static_cast<S>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    std::size_t step_count() const { return t_; }
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    std::vector<Parameter<S>*> params_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<S>> m_, v_;
};

}  // namespace pvad::nn
