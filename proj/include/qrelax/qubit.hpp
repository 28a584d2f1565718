#pragma once

#include "qrelax/units.hpp"

namespace qrelax {

// State-independent two-level-system parameters.
struct QubitParams {
    double delta;        // tunnel coupling, meV
    double temperature;  // bath / electron temperature, K

    QubitParams(double delta_meV, double temperature_K);
    double beta() const { return 1.0 / (PhysConstants::kB * temperature); }
};

struct EigenGeometry {
    double gap;    // hbar * Omega, meV
    double theta;  // mixing angle, rad, in [0, pi/2]
};

// sqrt(eps^2 + delta^2)
double energy_gap(double epsilon, double delta);

// Ground state cos(theta)|L> + sin(theta)|R>; theta = atan2(delta, eps) / 2.
double mixing_angle(double epsilon, double delta);

EigenGeometry eigen_geometry(double epsilon, double delta);

// |<E0(eps_to)|E0(eps_from)>|^2 = cos^2(theta_to - theta_from).
double ground_overlap(double epsilon_from, double epsilon_to, double delta);

struct OverlapPair {
    double same;     // mu
    double flipped;  // 1 - mu
};

// mu and 1 - mu from the eigenvector cosines/sines, each free of cancellation
// (near-identical bases and near-orthogonal bases alike). The gaps are passed
// in so hot loops can reuse them.
OverlapPair ground_overlap_pair(double epsilon_from, double gap_from, double epsilon_to, double gap_to,
                                double delta);

// Thermal probability of the excess charge sitting in the right dot.
double equilibrium_occupancy_R(double epsilon, double delta, double temperature);

// Thermal left-dot occupancy, 1 - P_R.
double equilibrium_occupancy_L(double epsilon, double delta, double temperature);

// Thermal ground-state population 1 / (1 + exp(-gap / kT)).
double equilibrium_ground_population(double epsilon, double delta, double temperature);

// Left-well charge expectation for a given ground population rho00.
double left_occupancy_from_ground(double epsilon, double delta, double rho00);

// Longest ramp (ns) across the anticrossing still counted as diabatic under
// the Landau-Zener criterion tau << 2 hbar d_eps / (pi delta^2).
double diabaticity_threshold(double toggle_amplitude, double delta);
bool is_diabatic(double ramp_time, double toggle_amplitude, double delta);

// Charge-sensor back-action rate in Hz for sensor currents in A.
double backaction_rate(double current_1, double current_2);

}  // namespace qrelax
