#pragma once

namespace qrelax {

// Two identical anisotropic harmonic wells at x = -L and x = +L, the
// Fock-Darwin ground state of each serving as the dot orbital.
class DotGeometry {
public:
    // e0, ez in meV; half_separation (L) in nm; b_field in T.
    DotGeometry(double e0, double ez, double half_separation, double b_field = 0.0);

    double e0() const { return e0_; }
    double ez() const { return ez_; }
    double half_separation() const { return half_separation_; }
    double b_field() const { return b_field_; }

    double dot_radius() const;         // a = sqrt(hbar^2 / (m_perp E0)), nm
    double thickness() const;          // b = sqrt(hbar^2 / (m_par Ez)), nm
    double magnetic_length() const;    // l0, nm; equals a at B = 0
    double cyclotron_energy() const;   // hbar e B / m_perp, meV
    double overlap_s() const;          // <phi_L|phi_R>
    double orthogonalization_g() const;
    double curvature() const;          // alpha_x = m_perp E0^2 / (2 hbar^2), meV / nm^2

    DotGeometry without_field() const { return {e0_, ez_, half_separation_, 0.0}; }

private:
    double e0_;
    double ez_;
    double half_separation_;
    double b_field_;
};

// Vertical confinement energy giving a dot of the requested thickness b (nm).
double ez_from_thickness(double thickness_nm);

struct LengthScales {
    double a;   // nm
    double b;   // nm
    double l0;  // nm
};

LengthScales length_scales(const DotGeometry& geometry);

double overlap(const DotGeometry& geometry);

// g(s) = (1 - sqrt(1 - s^2)) / s, in cancellation-free form.
double orthogonalization_coefficient(double s);

struct DeltaVElements {
    double ll;  // <phi_L|dV|phi_L>, meV
    double rr;  // <phi_R|dV|phi_R>, meV
    double lr;  // <phi_L|dV|phi_R>, meV
};

// Matrix elements of dV = min{V_L, V_R + eps} - (V_L + V_R + eps)/2 between
// the non-orthogonal dot orbitals. Throws DetuningOutOfRange unless the
// crossing point x0 = eps / (4 alpha_x L) lies strictly inside (-L, L).
DeltaVElements delta_v_elements(const DotGeometry& geometry, double epsilon);

// <phi|H_L|phi> for the single-dot ground state: E0 + Ez/2 (field neglected).
double single_dot_energy(const DotGeometry& geometry);

// Delta = -2 <L|H|R> in the orthogonalised basis. The magnetic field is
// neglected here (l0 = a, no Peierls phases).
double tunnel_coupling(const DotGeometry& geometry, double epsilon);

}  // namespace qrelax
