#include "qrelax/spectral.hpp"

#include <cmath>
#include <sstream>

#include "qrelax/errors.hpp"
#include "qrelax/quadrature.hpp"
#include "qrelax/special.hpp"
#include "qrelax/units.hpp"

namespace qrelax {

PhenomSpectral::PhenomSpectral(double s, double alpha, double omega_c_rad_per_ns)
    : s_exponent(s), coupling_alpha(alpha), omega_c(omega_c_rad_per_ns) {
    if (!(s_exponent >= 1.0) || !std::isfinite(s_exponent)) {
        throw ConfigError("spectral.s_exponent must be >= 1");
    }
    if (!(coupling_alpha > 0.0) || !std::isfinite(coupling_alpha)) {
        throw ConfigError("spectral.coupling_alpha must be > 0");
    }
    if (!(omega_c > 0.0) || !std::isfinite(omega_c)) {
        throw ConfigError("spectral.omega_c must be > 0");
    }
}

PhenomSpectral PhenomSpectral::from_cutoff_energy(double s, double alpha, double cutoff_meV) {
    return PhenomSpectral(s, alpha, energy_to_omega(cutoff_meV));
}

void Material::validate() const {
    if (!(mass_density > 0.0) || !(c_long > 0.0) || !(c_trans > 0.0)) {
        throw ConfigError("material: mass_density, c_long and c_trans must be positive");
    }
    if (!std::isfinite(xi_d) || !std::isfinite(xi_u)) {
        throw ConfigError("material: deformation potentials must be finite");
    }
}

MicroSpectral::MicroSpectral(DotGeometry geometry_, Material material_, double tol)
    : geometry(geometry_), material(material_), quadrature_tol(tol) {
    material.validate();
    if (!(quadrature_tol > 0.0) || quadrature_tol > 1e-4) {
        throw ConfigError("spectral.quadrature_tol must lie in (0, 1e-4]");
    }
}

TabulatedSpectral::TabulatedSpectral(std::vector<double> omega, std::vector<double> values)
    : omega_(std::move(omega)), values_(std::move(values)) {
    if (omega_.size() < 2 || omega_.size() != values_.size()) {
        throw ConfigError("tabulated spectral density needs >= 2 (omega, J) pairs");
    }
    std::vector<double> lx, ly;
    lx.reserve(omega_.size());
    ly.reserve(omega_.size());
    for (std::size_t i = 0; i < omega_.size(); ++i) {
        if (!(omega_[i] > 0.0) || !(values_[i] > 0.0)) {
            throw ConfigError("tabulated spectral density: log-log interpolation needs omega > 0 and J > 0");
        }
        if (i > 0 && !(omega_[i] > omega_[i - 1])) {
            throw ConfigError("tabulated spectral density: omega grid must be strictly increasing");
        }
        lx.push_back(std::log(omega_[i]));
        ly.push_back(std::log(values_[i]));
    }
    log_curve_ = MonotoneCubic(std::move(lx), std::move(ly));
}

double TabulatedSpectral::operator()(double omega) const {
    if (omega <= 0.0) return 0.0;
    return std::exp(log_curve_(std::log(omega)));
}

double j_phenom(double omega, const PhenomSpectral& model) {
    if (omega <= 0.0) return 0.0;
    const double hbar = PhysConstants::hbar;
    const double r = omega / model.omega_c;
    return model.coupling_alpha * hbar * hbar * omega * std::pow(r, model.s_exponent - 1.0) *
           std::exp(-0.5 * r * r);
}

namespace {

enum class Branch { Longitudinal, Transverse };

// Integrates the azimuthally reduced acoustic-phonon form over v = cos(theta).
double acoustic_branch(double omega, const MicroSpectral& model, Branch branch) {
    if (omega <= 0.0) return 0.0;
    const Material& mat = model.material;
    const double c = branch == Branch::Longitudinal ? mat.c_long : mat.c_trans;
    const double w = omega * 1e9;  // rad/s
    const double L = model.geometry.half_separation() * si::meter_per_nm;
    const double a = model.geometry.dot_radius() * si::meter_per_nm;
    const double b = model.geometry.thickness() * si::meter_per_nm;
    const double xl = w * L / c;
    const double xa2 = (w * a / c) * (w * a / c);
    const double xb2 = (w * b / c) * (w * b / c);

    const double xi_d = mat.xi_d;
    const double xi_u = mat.xi_u;
    auto integrand = [&](double v) {
        const double v2 = v * v;
        const double coupling = branch == Branch::Longitudinal
                                    ? (xi_d + xi_u * v2) * (xi_d + xi_u * v2)
                                    : xi_u * xi_u * v2 * (1.0 - v2);
        const double bessel = one_minus_bessel_j0(2.0 * xl * std::sqrt(1.0 - v2));
        return coupling * bessel * std::exp(-0.5 * (xa2 * (1.0 - v2) + xb2 * v2));
    };
    const double integral = integrate_adaptive(integrand, 0.0, 1.0, model.quadrature_tol).value;  // eV^2

    // hbar w^3 / (8 pi^2 rho c^5), SI; the integral carries eV^2
    const double prefactor = si::hbar * w * w * w / (8.0 * kPi * kPi * mat.mass_density * std::pow(c, 5));
    const double joule2_second = prefactor * integral * si::joule_per_eV * si::joule_per_eV;
    return joule2_second / (si::joule_per_meV * si::joule_per_meV) * 1e9;
}

}  // namespace

double j_long(double omega, const MicroSpectral& model) {
    return acoustic_branch(omega, model, Branch::Longitudinal);
}

double j_trans(double omega, const MicroSpectral& model) {
    return acoustic_branch(omega, model, Branch::Transverse);
}

double j_micro(double omega, const MicroSpectral& model) {
    return j_long(omega, model) + j_trans(omega, model);
}

double spectral_density(double omega, const SpectralModel& model) {
    return std::visit(
        [omega](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PhenomSpectral>) {
                return j_phenom(omega, m);
            } else if constexpr (std::is_same_v<T, MicroSpectral>) {
                return j_micro(omega, m);
            } else {
                return m(omega);
            }
        },
        model);
}

double relaxation_rate_from_density(double gap, double density, const QubitParams& qubit) {
    const double hbar = PhysConstants::hbar;
    const double ratio = qubit.delta / gap;
    const double x = 0.5 * gap * qubit.beta();
    return 2.0 * kPi / (hbar * hbar) * ratio * ratio * density / std::tanh(x);
}

double relaxation_rate(double epsilon, const QubitParams& qubit, const SpectralModel& model) {
    const double gap = energy_gap(epsilon, qubit.delta);
    return relaxation_rate_from_density(gap, spectral_density(energy_to_omega(gap), model), qubit);
}

}  // namespace qrelax
