#include "qrelax/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "qrelax/errors.hpp"

namespace qrelax {

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double relative_tolerance, unsigned max_depth) {
    using boost::math::quadrature::gauss_kronrod;
    double error = 0.0;
    double l1 = 0.0;
    const double value = gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, relative_tolerance,
                                                              &error, &l1);
    // boost reports an absolute error estimate; an identically zero integrand
    // is always converged
    if (!std::isfinite(value) || error > relative_tolerance * std::max(std::fabs(value), l1)) {
        std::ostringstream os;
        os << "adaptive quadrature did not reach relative tolerance " << relative_tolerance
           << " (estimate " << error << ")";
        throw QuadratureError(os.str(), error);
    }
    return {value, error};
}

}  // namespace qrelax
