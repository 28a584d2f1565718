#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "qrelax/dotgeom.hpp"
#include "qrelax/monotone_cubic.hpp"
#include "qrelax/qubit.hpp"

namespace qrelax {

// J(w) = alpha hbar^2 w (w / w_c)^(s-1) exp(-w^2 / (2 w_c^2)).
struct PhenomSpectral {
    double s_exponent;      // s >= 1
    double coupling_alpha;  // > 0
    double omega_c;         // rad/ns

    PhenomSpectral(double s, double alpha, double omega_c_rad_per_ns);
    static PhenomSpectral from_cutoff_energy(double s, double alpha, double cutoff_meV);
    double cutoff_energy() const { return omega_to_energy(omega_c); }
};

// Deformation potentials in eV, density in kg/m^3, sound speeds in m/s.
// Defaults are bulk silicon.
struct Material {
    double xi_d = -10.7;
    double xi_u = 9.29;
    double mass_density = 2.33e3;
    double c_long = 9.0e3;
    double c_trans = 5.41e3;

    void validate() const;
};

struct MicroSpectral {
    DotGeometry geometry;
    Material material{};
    double quadrature_tol = 1e-8;

    MicroSpectral(DotGeometry geometry, Material material = {}, double quadrature_tol = 1e-8);
};

// J sampled on a strictly increasing w grid, interpolated monotonically in
// (log w, log J) and extrapolated along the boundary log-log slope.
class TabulatedSpectral {
public:
    TabulatedSpectral(std::vector<double> omega, std::vector<double> values);
    double operator()(double omega) const;
    const std::vector<double>& omega() const { return omega_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> omega_;
    std::vector<double> values_;
    MonotoneCubic log_curve_;
};

using SpectralModel = std::variant<PhenomSpectral, MicroSpectral, TabulatedSpectral>;

// All spectral densities are returned in meV^2 ns (hbar^2 x angular frequency);
// omega arguments are in rad/ns.
double j_phenom(double omega, const PhenomSpectral& model);
double j_long(double omega, const MicroSpectral& model);
double j_trans(double omega, const MicroSpectral& model);
double j_micro(double omega, const MicroSpectral& model);
double spectral_density(double omega, const SpectralModel& model);

// Born-Markov relaxation rate towards equilibrium at detuning epsilon, 1/ns:
// (2 pi / hbar^2) (delta / hbar w)^2 J(w) coth(hbar w / 2kT) with hbar w the gap.
double relaxation_rate(double epsilon, const QubitParams& qubit, const SpectralModel& model);

// Same, given an already evaluated J at the gap frequency.
double relaxation_rate_from_density(double gap, double density, const QubitParams& qubit);

}  // namespace qrelax
