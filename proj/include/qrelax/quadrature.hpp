#pragma once

#include <functional>

namespace qrelax {

struct QuadratureResult {
    double value;
    double error_estimate;
};

// Adaptive Gauss-Kronrod (7/15) integration of f over [a, b] to the given
// relative tolerance. Throws QuadratureError carrying the achieved error
// estimate if the tolerance is not met at maximum refinement depth.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double relative_tolerance, unsigned max_depth = 18);

}  // namespace qrelax
