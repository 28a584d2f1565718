#pragma once

#include "doctest.h"

// Purely relative comparison (doctest's default Approx adds an absolute
// floor of epsilon, which is meaningless for tiny physical quantities).
inline doctest::Approx rel(double value, double eps) { return doctest::Approx(value).epsilon(eps).scale(0.0); }
