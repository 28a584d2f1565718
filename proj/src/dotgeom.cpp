#include "qrelax/dotgeom.hpp"

#include <cmath>
#include <sstream>

#include "qrelax/errors.hpp"
#include "qrelax/units.hpp"

namespace qrelax {

namespace {

double mass_perp() { return kMassPerp * si::electron_mass; }
double mass_par() { return kMassParallel * si::electron_mass; }

// sqrt(hbar^2 / (m E)) in nm for E in meV
double oscillator_length(double mass, double energy_meV) {
    return si::hbar / std::sqrt(mass * energy_meV * si::joule_per_meV) / si::meter_per_nm;
}

DeltaVElements delta_v_impl(double alpha_x, double L, double l0, double s, double epsilon) {
    const double x0 = epsilon / (4.0 * alpha_x * L);
    if (!(std::fabs(x0) < L)) {
        throw DetuningOutOfRange(epsilon, x0, L);
    }
    const double tail = 2.0 * alpha_x * L * l0 / std::sqrt(kPi);
    const double up = (L + x0) / l0;
    const double dn = (L - x0) / l0;
    const double mid = x0 / l0;
    DeltaVElements out{};
    out.ll = -(0.5 * epsilon + 2.0 * alpha_x * L * L) * std::erf(up) - tail * std::exp(-up * up);
    out.rr = (0.5 * epsilon - 2.0 * alpha_x * L * L) * std::erf(dn) - tail * std::exp(-dn * dn);
    out.lr = -s * (0.5 * epsilon * std::erf(mid) + tail * std::exp(-mid * mid));
    return out;
}

}  // namespace

DotGeometry::DotGeometry(double e0, double ez, double half_separation, double b_field)
    : e0_(e0), ez_(ez), half_separation_(half_separation), b_field_(b_field) {
    if (!(e0_ > 0.0) || !(ez_ > 0.0) || !(half_separation_ > 0.0)) {
        std::ostringstream os;
        os << "geometry: e0, ez and half_separation must be positive (got e0 = " << e0_
           << " meV, ez = " << ez_ << " meV, L = " << half_separation_ << " nm)";
        throw ConfigError(os.str());
    }
    if (!std::isfinite(b_field_)) throw ConfigError("geometry: b_field must be finite");
    if (!(thickness() < dot_radius() / 3.0)) {
        std::ostringstream os;
        os << "geometry: single-valley regime needs b < a/3 (b = " << thickness()
           << " nm, a = " << dot_radius() << " nm)";
        throw ConfigError(os.str());
    }
}

double DotGeometry::dot_radius() const { return oscillator_length(mass_perp(), e0_); }

double DotGeometry::thickness() const { return oscillator_length(mass_par(), ez_); }

double DotGeometry::cyclotron_energy() const {
    return si::hbar * PhysConstants::e_charge * std::fabs(b_field_) / mass_perp() / si::joule_per_meV;
}

double DotGeometry::magnetic_length() const {
    const double half_cyc = 0.5 * cyclotron_energy() * si::joule_per_meV;
    const double e0 = e0_ * si::joule_per_meV;
    return si::hbar / std::sqrt(mass_perp()) * std::pow(half_cyc * half_cyc + e0 * e0, -0.25) /
           si::meter_per_nm;
}

double DotGeometry::overlap_s() const {
    const double l0 = magnetic_length();
    const double L = half_separation_;
    const double phase = PhysConstants::e_charge * b_field_ * (L * si::meter_per_nm) *
                         (l0 * si::meter_per_nm) / (2.0 * si::hbar);
    return std::exp(-((L / l0) * (L / l0) + phase * phase));
}

double DotGeometry::orthogonalization_g() const { return orthogonalization_coefficient(overlap_s()); }

double DotGeometry::curvature() const {
    const double a = dot_radius();
    return e0_ / (2.0 * a * a);
}

double ez_from_thickness(double thickness_nm) {
    if (!(thickness_nm > 0.0)) throw ConfigError("geometry: thickness must be positive");
    const double b = thickness_nm * si::meter_per_nm;
    return si::hbar * si::hbar / (mass_par() * b * b) / si::joule_per_meV;
}

LengthScales length_scales(const DotGeometry& geometry) {
    return {geometry.dot_radius(), geometry.thickness(), geometry.magnetic_length()};
}

double overlap(const DotGeometry& geometry) { return geometry.overlap_s(); }

double orthogonalization_coefficient(double s) { return s / (1.0 + std::sqrt(1.0 - s * s)); }

DeltaVElements delta_v_elements(const DotGeometry& geometry, double epsilon) {
    return delta_v_impl(geometry.curvature(), geometry.half_separation(), geometry.magnetic_length(),
                        geometry.overlap_s(), epsilon);
}

double single_dot_energy(const DotGeometry& geometry) { return geometry.e0() + 0.5 * geometry.ez(); }

double tunnel_coupling(const DotGeometry& geometry, double epsilon) {
    const DotGeometry g0 = geometry.without_field();
    const double alpha_x = g0.curvature();
    const double L = g0.half_separation();
    const double s = g0.overlap_s();
    const double g = orthogonalization_coefficient(s);
    const DeltaVElements dv = delta_v_impl(alpha_x, L, g0.dot_radius(), s, epsilon);
    const double e_left = single_dot_energy(g0);
    const double e_right = e_left + epsilon;
    const double norm = 1.0 - 2.0 * s * g + g * g;
    const double bracket = 0.5 * (e_left + e_right) * (s * (1.0 + g * g) - 2.0 * g) +
                           (1.0 + g * g) * dv.lr - g * (4.0 * alpha_x * L * L + dv.ll + dv.rr);
    return -2.0 / norm * bracket;
}

}  // namespace qrelax
