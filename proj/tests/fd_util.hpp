#pragma once

// Test-only finite-difference oracle, kept independent of the library's
// backward passes.

#include <Eigen/Core>

#include <cmath>
#include <functional>

namespace testutil {

// Central difference d f / d (*x) with the stored value restored afterwards.
inline double central_diff(const std::function<double()>& f, double* x, double h = 1e-5) {
    const double saved = *x;
    *x = saved + h;
    const double up = f();
    *x = saved - h;
    const double down = f();
    *x = saved;
    return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    const double diff = std::abs(a - b);
    if (diff < 1e-9) return 0.0;  // below central-difference noise
    return diff / std::max(std::abs(a), std::abs(b));
}

// Worst relative error between an analytic gradient block and central
// differences of `f` over the entries of `params`.
inline double max_block_rel_err(const std::function<double()>& f, double* params,
                                const double* analytic, Eigen::Index count, double h = 1e-5) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) {
        worst = std::max(worst, rel_err(analytic[i], central_diff(f, params + i, h)));
    }
    return worst;
}

}  // namespace testutil
