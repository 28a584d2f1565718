#include "qrelax/special.hpp"

#include <cmath>

namespace qrelax {

double bessel_j0(double x) { return std::cyl_bessel_j(0.0, std::fabs(x)); }

double one_minus_bessel_j0(double x) {
    const double ax = std::fabs(x);
    if (ax < 1e-3) {
        const double x2 = ax * ax;
        return x2 / 4.0 - x2 * x2 / 64.0 + x2 * x2 * x2 / 2304.0;
    }
    return 1.0 - bessel_j0(ax);
}

}  // namespace qrelax
