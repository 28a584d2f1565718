#pragma once

#include <functional>
#include <vector>

#include "qrelax/monotone_cubic.hpp"

namespace qrelax {

// Relaxation rate as an even function of detuning: log Gamma is a monotone
// cubic in |eps| through the knots, so Gamma > 0 everywhere. Past the last
// knot the boundary log-slope continues.
class RateCurve {
public:
    RateCurve() = default;
    // knots: strictly increasing |eps| values >= 0, meV; log_values: ln(Gamma / (1/ns))
    RateCurve(std::vector<double> knots, std::vector<double> log_values);

    static RateCurve constant(std::vector<double> knots, double rate);
    static RateCurve tabulate(std::vector<double> knots, const std::function<double(double)>& rate);

    double operator()(double epsilon) const;  // 1/ns
    double log_rate(double epsilon) const;
    // Gamma as a function of the gap, for gap >= delta
    double at_gap(double gap, double delta) const;

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& log_values() const { return log_values_; }
    std::size_t size() const { return knots_.size(); }
    std::vector<double> knot_gaps(double delta) const;
    RateCurve with_log_values(std::vector<double> log_values) const;

    // Interval of |eps| on which the curve changes when log_values[j] moves.
    struct Support {
        double lower;
        double upper;  // +inf when the boundary extrapolation is affected
    };
    Support knot_support(std::size_t j) const;

private:
    std::vector<double> knots_;
    std::vector<double> log_values_;
    MonotoneCubic spline_;
};

// count knots uniform on [0, e_max].
std::vector<double> uniform_knots(double e_max, int count = 12);

}  // namespace qrelax
