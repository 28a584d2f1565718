#pragma once

#include <span>
#include <vector>

namespace qrelax {

// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Butland
// derivatives, three-point end conditions). Outside the knot span the curve
// continues linearly with the end derivative.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    double derivative(double x) const;

    std::span<const double> x() const { return x_; }
    std::span<const double> y() const { return y_; }
    std::size_t size() const { return x_.size(); }

private:
    std::size_t interval(double x) const;

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> d_;
};

}  // namespace qrelax
