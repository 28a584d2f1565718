#pragma once

namespace qrelax {

// Zeroth-order Bessel function of the first kind.
double bessel_j0(double x);

// 1 - J0(x), switching to the even power series below |x| = 1e-3 where the
// direct difference loses precision.
double one_minus_bessel_j0(double x);

}  // namespace qrelax
