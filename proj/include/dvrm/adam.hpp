#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dvrm/tape.hpp"

namespace dvrm {

struct AdamConfig {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(lr > 0)) throw ParamError("adam: lr must be positive");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw ParamError("adam: betas must lie in [0,1)");
        if (!(eps > 0)) throw ParamError("adam: eps must be positive");
    }
};

/// Bias-corrected Adam over a fixed set of Parameters. Reads p->grad, updates
/// p->value in place. A non-finite gradient refuses the whole step, leaving
/// both params and moments untouched.
template <typename T>
class Adam {
public:
    Adam(std::vector<Parameter<T>*> params, AdamConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        for (auto* p : params)
            slots_.push_back({p, Tensor<T>(p->value.shape(), T(0)),
                              Tensor<T>(p->value.shape(), T(0))});
    }

    std::size_t step_count() const { return t_; }

    void step() {
        for (const auto& s : slots_)
            if (!all_finite(s.p->grad.data(), s.p->grad.numel()))
                throw NumericError("adam: non-finite gradient in '" + s.p->name +
                                   "', step refused");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (auto& s : slots_) {
            const std::size_t n = s.p->value.numel();
            for (std::size_t i = 0; i < n; ++i) {
                double g = double(s.p->grad[i]);
                double m = cfg_.beta1 * double(s.m[i]) + (1.0 - cfg_.beta1) * g;
                double v = cfg_.beta2 * double(s.v[i]) + (1.0 - cfg_.beta2) * g * g;
                s.m[i] = T(m);
                s.v[i] = T(v);
                double update = cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
                s.p->value[i] = T(double(s.p->value[i]) - update);
            }
        }
    }

private:
    struct Slot {
        Parameter<T>* p;
        Tensor<T> m, v;
    };
    AdamConfig cfg_;
    std::vector<Slot> slots_;
    std::size_t t_ = 0;
};

} // namespace dvrm
