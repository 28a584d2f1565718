#include "qrelax/qubit.hpp"

#include <cmath>
#include <sstream>

#include "qrelax/errors.hpp"

namespace qrelax {

QubitParams::QubitParams(double delta_meV, double temperature_K)
    : delta(delta_meV), temperature(temperature_K) {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        std::ostringstream os;
        os << "qubit.delta must be > 0 meV, got " << delta;
        throw ConfigError(os.str());
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        std::ostringstream os;
        os << "qubit.temperature must be > 0 K, got " << temperature;
        throw ConfigError(os.str());
    }
}

double energy_gap(double epsilon, double delta) { return std::hypot(epsilon, delta); }

double mixing_angle(double epsilon, double delta) { return 0.5 * std::atan2(delta, epsilon); }

EigenGeometry eigen_geometry(double epsilon, double delta) {
    return {energy_gap(epsilon, delta), mixing_angle(epsilon, delta)};
}

OverlapPair ground_overlap_pair(double epsilon_from, double gap_from, double epsilon_to, double gap_to,
                                double delta) {
    // c = cos(2 theta_to - 2 theta_from), sn = sin(2 theta_to - 2 theta_from)
    const double norm = 1.0 / (gap_to * gap_from);
    const double c = (epsilon_to * epsilon_from + delta * delta) * norm;
    const double sn = delta * (epsilon_from - epsilon_to) * norm;
    const double s2 = sn * sn;
    if (c >= 0.0) {
        return {0.5 * (1.0 + c), 0.5 * s2 / (1.0 + c)};
    }
    return {0.5 * s2 / (1.0 - c), 0.5 * (1.0 - c)};
}

double ground_overlap(double epsilon_from, double epsilon_to, double delta) {
    return ground_overlap_pair(epsilon_from, energy_gap(epsilon_from, delta), epsilon_to,
                               energy_gap(epsilon_to, delta), delta)
        .same;
}

double equilibrium_occupancy_R(double epsilon, double delta, double temperature) {
    const double gap = energy_gap(epsilon, delta);
    const double kt = PhysConstants::kB * temperature;
    return 0.5 * (1.0 - (epsilon / gap) * std::tanh(gap / (2.0 * kt)));
}

double equilibrium_occupancy_L(double epsilon, double delta, double temperature) {
    const double gap = energy_gap(epsilon, delta);
    const double kt = PhysConstants::kB * temperature;
    return 0.5 * (1.0 + (epsilon / gap) * std::tanh(gap / (2.0 * kt)));
}

double equilibrium_ground_population(double epsilon, double delta, double temperature) {
    const double gap = energy_gap(epsilon, delta);
    return 1.0 / (1.0 + std::exp(-gap / (PhysConstants::kB * temperature)));
}

double left_occupancy_from_ground(double epsilon, double delta, double rho00) {
    const double x = epsilon / energy_gap(epsilon, delta);
    return 0.5 * (1.0 - x) + x * rho00;
}

double diabaticity_threshold(double toggle_amplitude, double delta) {
    return 2.0 * PhysConstants::hbar * toggle_amplitude / (kPi * delta * delta);
}

bool is_diabatic(double ramp_time, double toggle_amplitude, double delta) {
    return ramp_time < diabaticity_threshold(toggle_amplitude, delta);
}

double backaction_rate(double current_1, double current_2) {
    if (current_1 < 0.0 || current_2 < 0.0) {
        throw ConfigError("backaction_rate: sensor currents must be non-negative");
    }
    const double d = std::sqrt(current_1) - std::sqrt(current_2);
    return d * d / (2.0 * kPi * PhysConstants::e_charge);
}

}  // namespace qrelax
