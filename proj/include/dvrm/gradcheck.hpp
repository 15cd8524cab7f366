#pragma once

#include <cmath>
#include <cstring>
#include <functional>

#include "dvrm/tape.hpp"

namespace dvrm {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
};

/// Central-difference check of the analytic gradient of one Parameter.
///
/// `run(with_grad)` must rebuild the computation from scratch each call and
/// return the scalar loss; when with_grad is set it must also run backward so
/// the analytic gradient lands in p.grad. The function is executed twice up
/// front and must return bit-identical losses, otherwise the check throws.
///
/// Relative error per coordinate is |analytic - numeric| / (|numeric| + 1e-12).
/// With max_coords == 0 every coordinate is checked; otherwise an evenly
/// spaced deterministic sample of max_coords coordinates is used.
template <typename T>
GradCheckResult finite_diff_check(const std::function<T(bool)>& run, Parameter<T>& p,
                                  T eps, std::size_t max_coords = 0) {
    if (!(eps > T(0))) throw ParamError("finite_diff_check: eps must be positive");
    T l1 = run(false);
    T l2 = run(false);
    if (std::memcmp(&l1, &l2, sizeof(T)) != 0)
        throw NumericError("finite_diff_check: loss function is nondeterministic (" +
                           std::to_string((double)l1) + " vs " + std::to_string((double)l2) + ")");
    p.zero_grad();
    run(true);
    Tensor<T> analytic = p.grad;

    std::size_t n = p.value.numel();
    std::size_t count = (max_coords == 0 || max_coords >= n) ? n : max_coords;
    GradCheckResult res;
    res.coords_checked = count;
    for (std::size_t t = 0; t < count; ++t) {
        std::size_t i = (count == n) ? t : (2 * t + 1) * n / (2 * count);
        T saved = p.value[i];
        p.value[i] = saved + eps;
        T fp = run(false);
        p.value[i] = saved - eps;
        T fm = run(false);
        p.value[i] = saved;
        double numeric = (double(fp) - double(fm)) / (2.0 * double(eps));
        double a = double(analytic[i]);
        res.max_rel_err =
            std::max(res.max_rel_err, std::abs(a - numeric) / (std::abs(numeric) + 1e-12));
    }
    return res;
}

} // namespace dvrm
