#include "qrelax/rate_curve.hpp"

#include <cmath>
#include <limits>

#include "qrelax/errors.hpp"

namespace qrelax {

RateCurve::RateCurve(std::vector<double> knots, std::vector<double> log_values)
    : knots_(std::move(knots)), log_values_(std::move(log_values)) {
    if (knots_.size() < 2 || knots_.size() != log_values_.size()) {
        throw ConfigError("rate curve needs at least two knots with matching log-values");
    }
    if (knots_.front() < 0.0) throw ConfigError("rate curve knots are |eps| values and must be >= 0");
    spline_ = MonotoneCubic(knots_, log_values_);
}

RateCurve RateCurve::constant(std::vector<double> knots, double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ConfigError("constant rate must be finite and > 0");
    std::vector<double> logs(knots.size(), std::log(rate));
    return RateCurve(std::move(knots), std::move(logs));
}

RateCurve RateCurve::tabulate(std::vector<double> knots, const std::function<double(double)>& rate) {
    std::vector<double> logs;
    logs.reserve(knots.size());
    for (double k : knots) {
        const double g = rate(k);
        if (!(g > 0.0) || !std::isfinite(g)) {
            throw ConfigError("rate curve tabulation needs finite positive rates");
        }
        logs.push_back(std::log(g));
    }
    return RateCurve(std::move(knots), std::move(logs));
}

double RateCurve::log_rate(double epsilon) const { return spline_(std::fabs(epsilon)); }

double RateCurve::operator()(double epsilon) const { return std::exp(log_rate(epsilon)); }

double RateCurve::at_gap(double gap, double delta) const {
    const double e2 = gap * gap - delta * delta;
    return (*this)(e2 > 0.0 ? std::sqrt(e2) : 0.0);
}

std::vector<double> RateCurve::knot_gaps(double delta) const {
    std::vector<double> g;
    g.reserve(knots_.size());
    for (double k : knots_) g.push_back(std::hypot(k, delta));
    return g;
}

RateCurve RateCurve::with_log_values(std::vector<double> log_values) const {
    return RateCurve(knots_, std::move(log_values));
}

RateCurve::Support RateCurve::knot_support(std::size_t j) const {
    // a knot value enters the derivatives at j - 1, j, j + 1, and the
    // three-point end derivatives reach two knots in
    const std::size_t n = knots_.size();
    const double inf = std::numeric_limits<double>::infinity();
    if (n <= 4) return {0.0, inf};
    const double lower = j <= 2 ? 0.0 : knots_[j - 2];
    const double upper = j + 3 >= n ? inf : knots_[j + 2];
    return {lower, upper};
}

std::vector<double> uniform_knots(double e_max, int count) {
    if (!(e_max > 0.0) || count < 2) throw ConfigError("uniform_knots: need e_max > 0 and count >= 2");
    std::vector<double> k(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) k[static_cast<std::size_t>(i)] = e_max * i / (count - 1);
    return k;
}

}  // namespace qrelax
