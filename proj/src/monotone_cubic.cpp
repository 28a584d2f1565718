#include "qrelax/monotone_cubic.hpp"

#include <algorithm>
#include <cmath>

#include "qrelax/errors.hpp"

namespace qrelax {

namespace {

double end_derivative(double h0, double h1, double m0, double m1) {
    double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (std::signbit(d) != std::signbit(m0) || m0 == 0.0) {
        d = 0.0;
    } else if (std::signbit(m0) != std::signbit(m1) && std::fabs(d) > 3.0 * std::fabs(m0)) {
        d = 3.0 * m0;
    }
    return d;
}

}  // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) {
        throw ConfigError("monotone cubic needs at least two knots with matching values");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x_[i]) || !std::isfinite(y_[i])) {
            throw ConfigError("monotone cubic knots and values must be finite");
        }
        if (i > 0 && !(x_[i] > x_[i - 1])) {
            throw ConfigError("monotone cubic knots must be strictly increasing");
        }
    }

    std::vector<double> h(n - 1), m(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        m[i] = (y_[i + 1] - y_[i]) / h[i];
    }

    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = m[0];
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (m[i - 1] * m[i] <= 0.0) {
            d_[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / m[i - 1] + w2 / m[i]);
        }
    }
    d_[0] = end_derivative(h[0], h[1], m[0], m[1]);
    d_[n - 1] = end_derivative(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
}

std::size_t MonotoneCubic::interval(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const auto i = static_cast<std::size_t>(std::distance(x_.begin(), it));
    return std::clamp<std::size_t>(i, 1, x_.size() - 1) - 1;
}

double MonotoneCubic::operator()(double x) const {
    if (x <= x_.front()) return y_.front() + d_.front() * (x - x_.front());
    if (x >= x_.back()) return y_.back() + d_.back() * (x - x_.back());
    const std::size_t i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2.0 * t3 - 3.0 * t2 + 1.0) * y_[i] + (t3 - 2.0 * t2 + t) * h * d_[i] +
           (-2.0 * t3 + 3.0 * t2) * y_[i + 1] + (t3 - t2) * h * d_[i + 1];
}

double MonotoneCubic::derivative(double x) const {
    if (x <= x_.front()) return d_.front();
    if (x >= x_.back()) return d_.back();
    const std::size_t i = interval(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    return ((6.0 * t2 - 6.0 * t) * y_[i] + (6.0 * t - 6.0 * t2) * y_[i + 1]) / h +
           (3.0 * t2 - 4.0 * t + 1.0) * d_[i] + (3.0 * t2 - 2.0 * t) * d_[i + 1];
}

}  // namespace qrelax
