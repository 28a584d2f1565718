#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "qrelax/qubit.hpp"

namespace qrelax {

// Relaxation rate Gamma_r as a function of detuning (meV -> 1/ns).
using RateFunction = std::function<double(double)>;

// eps(t) = offset + (toggle_amplitude / 2) h(f t) + dither_amplitude sin(2 pi nu t),
// h a +-1 square wave of unit period starting high. One dither period is
// discretised into steps_per_period piecewise-constant intervals.
struct PulseSchedule {
    double offset = 0.0;            // meV
    double toggle_amplitude = 0.0;  // meV, peak to peak
    double toggle_freq = 43.0;      // Hz
    double dither_amplitude = 0.0;  // meV
    double dither_freq = 43.0;      // Hz
    double ramp_time = 16.0;        // ns; metadata, ramps are instantaneous in the model
    int steps_per_period = 4096;

    double period() const { return 1e9 / dither_freq; }  // ns
    double step() const { return period() / steps_per_period; }
    // f / nu; throws ConfigError if not a positive integer
    int toggles_per_dither() const;
    void validate() const;
};

// Smallest N >= max(target, 64) that puts every square-wave edge on a step boundary.
int compatible_steps(int target, int toggles_per_dither);

struct WaveformSample {
    double epsilon;  // meV
    double dt;       // ns
};

// Midpoint samples t_k = (k - 1/2) dt over one dither period.
std::vector<WaveformSample> discretize_waveform(const PulseSchedule& schedule);

struct PopulationPair {
    double rho00;
    double rho11;
};

// 2x2 real matrix acting on (rho00, rho11) column vectors.
class TransferMatrix {
public:
    constexpr TransferMatrix(double m00, double m01, double m10, double m11) : m_{m00, m01, m10, m11} {}
    static constexpr TransferMatrix identity() { return {1.0, 0.0, 0.0, 1.0}; }

    double operator()(int row, int col) const { return m_[static_cast<std::size_t>(2 * row + col)]; }
    double column_sum(int col) const { return (*this)(0, col) + (*this)(1, col); }
    TransferMatrix operator*(const TransferMatrix& rhs) const;
    PopulationPair apply(const PopulationPair& p) const;

private:
    std::array<double, 4> m_;
};

// Relaxation over dt at fixed detuning (decay factor exp(-dt Gamma)); with
// as_average the interval-averaged map, factor (1 - exp(-dt Gamma)) / (dt Gamma).
TransferMatrix relax_matrix(double epsilon, double dt, double rate, const QubitParams& qubit, bool as_average);
TransferMatrix relax_matrix(double epsilon, double dt, const RateFunction& rate, const QubitParams& qubit,
                            bool as_average);

// Population transfer between the energy eigenbases at eps_from and eps_to.
TransferMatrix basis_change_matrix(double epsilon_from, double epsilon_to, const QubitParams& qubit);

// Full-period map, time ordered right to left, with periodic closure.
TransferMatrix period_map(const PulseSchedule& schedule, const RateFunction& rate, const QubitParams& qubit);

// Stationary populations of a column-stochastic map. Throws DegenerateMap if
// the map is the identity to 1e-14.
PopulationPair fixed_point(const TransferMatrix& map);

// Time-averaged left-dot occupancy in the periodic steady state. start_index
// rotates the discretised waveform (a pure phase shift of the orbit).
double mean_left_occupancy(const PulseSchedule& schedule, const RateFunction& rate, const QubitParams& qubit,
                           int start_index = 0);

// n(offset, f) on a grid; values stored frequency-major.
struct OccupancyMap {
    std::vector<double> offsets;  // meV, strictly increasing
    std::vector<double> freqs;    // Hz, strictly increasing
    std::vector<double> values;   // size freqs * offsets
    std::vector<double> sigma;    // empty or same size as values

    OccupancyMap() = default;
    OccupancyMap(std::vector<double> offsets, std::vector<double> freqs);

    std::size_t index(std::size_t freq_index, std::size_t offset_index) const {
        return freq_index * offsets.size() + offset_index;
    }
    double& at(std::size_t freq_index, std::size_t offset_index) { return values[index(freq_index, offset_index)]; }
    double at(std::size_t freq_index, std::size_t offset_index) const {
        return values[index(freq_index, offset_index)];
    }
    std::span<const double> row(std::size_t freq_index) const {
        return std::span<const double>(values).subspan(freq_index * offsets.size(), offsets.size());
    }
    // grid shape and ordering; with check_range also values in [0, 1]
    void validate(bool check_range = true) const;
};

struct MapOptions {
    int threads = 1;
    // Every grid point uses the same N, the smallest multiple of all
    // 2 f/nu not below the template's steps_per_period, when that stays
    // within this multiple of the target; otherwise each frequency rounds up
    // on its own.
    int max_common_steps_factor = 4;
};

// Steps per period occupancy_map will use at toggle frequency f.
int map_steps_for(const PulseSchedule& schedule_template, std::span<const double> freqs, double freq,
                  const MapOptions& options = {});

// One mean_left_occupancy evaluation per (offset, f). Per-point failures are
// collected and reported together as ForwardModelFailure.
OccupancyMap occupancy_map(std::span<const double> offsets, std::span<const double> freqs, const RateFunction& rate,
                           const QubitParams& qubit, const PulseSchedule& schedule_template,
                           const MapOptions& options = {});

// Per-offset evaluation hook used by incremental recomputation: only offsets
// with mask[i] set are evaluated, the rest copied from base.
OccupancyMap occupancy_map_masked(std::span<const double> offsets, std::span<const double> freqs,
                                  const RateFunction& rate, const QubitParams& qubit,
                                  const PulseSchedule& schedule_template, const OccupancyMap& base,
                                  const std::vector<char>& mask, const MapOptions& options = {});

// dn/d(offset): central differences inside, one-sided at the edges.
OccupancyMap differential_map(const OccupancyMap& map);

}  // namespace qrelax
