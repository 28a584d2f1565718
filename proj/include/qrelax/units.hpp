#pragma once

// Unit conventions: energies in meV, times in ns, temperatures in K, rates in
// 1/ns, lengths in nm. Hz/kHz and volts appear only at I/O boundaries.

namespace qrelax {

struct PhysConstants {
    static constexpr double hbar = 6.582119569e-4;       // meV ns
    static constexpr double kB = 8.617333262e-2;         // meV / K
    static constexpr double e_charge = 1.602176634e-19;  // C
};

namespace si {
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double electron_mass = 9.1093837015e-31;  // kg
inline constexpr double joule_per_meV = 1.602176634e-22;
inline constexpr double joule_per_eV = 1.602176634e-19;
inline constexpr double meter_per_nm = 1e-9;
}  // namespace si

// silicon effective masses, in units of the free electron mass
inline constexpr double kMassPerp = 0.19;
inline constexpr double kMassParallel = 0.98;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double rate_per_ns_to_hz(double rate) { return rate * 1e9; }
inline constexpr double hz_to_rate_per_ns(double hz) { return hz * 1e-9; }

// angular frequency (rad/ns) <-> energy quantum (meV)
inline constexpr double omega_to_energy(double omega) { return PhysConstants::hbar * omega; }
inline constexpr double energy_to_omega(double energy) { return energy / PhysConstants::hbar; }

}  // namespace qrelax
