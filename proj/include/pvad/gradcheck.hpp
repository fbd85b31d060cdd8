#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pvad/layers.hpp"

namespace pvad::nn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_coord;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coords_checked = 0;
};

/// Central-difference gradient verification, 64-bit only. Analytic gradients
/// are snapshotted when a target is added, so run the backward pass first,
/// then add targets, then call run() with a pure forward loss.
class GradChecker {
public:
    explicit GradChecker(double eps = 1e-5, double guard = 1e-6) : eps_(eps), guard_(guard) {}

    void add(std::string name, double* values, const double* analytic, std::size_t n) {
        targets_.push_back({std::move(name), values, {analytic, analytic + n}});
    }

    void add(Parameter<double>& p) { add(p.name, p.value.data(), p.grad.data(), p.value.size()); }

    void add_tensor(std::string name, Tensor<double>& value, const Tensor<double>& grad) {
        if (value.size() != grad.size())
            throw ShapeError("gradcheck " + name + ": value " + shape_str(value.shape()) +
                             " vs grad " + shape_str(grad.shape()));
        add(std::move(name), value.data(), grad.data(), value.size());
    }

    template <typename LossFn>
    GradCheckReport run(LossFn&& loss) {
        GradCheckReport rep;
        for (auto& t : targets_) {
            for (std::size_t i = 0; i < t.analytic.size(); ++i) {
                const double saved = t.values[i];
                t.values[i] = saved + eps_;
                const double up = loss();
                t.values[i] = saved - eps_;
                const double down = loss();
                t.values[i] = saved;
                const double numeric = (up - down) / (2.0 * eps_);
                const double ga = t.analytic[i];
                const double denom = std::max({std::abs(ga), std::abs(numeric), guard_});
                const double rel = std::abs(ga - numeric) / denom;
                ++rep.coords_checked;
                if (rel > rep.max_rel_err) {
                    rep.max_rel_err = rel;
                    rep.worst_coord = t.name + "[" + std::to_string(i) + "]";
                    rep.analytic = ga;
                    rep.numeric = numeric;
                }
            }
        }
        return rep;
    }

private:
    struct Target {
        std::string name;
        double* values;
        std::vector<double> analytic;
    };

    double eps_, guard_;
    std::vector<Target> targets_;
};

}  // namespace pvad::nn
