#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qrelax/dotgeom.hpp"
#include "qrelax/dynamics.hpp"
#include "qrelax/least_squares.hpp"
#include "qrelax/rate_curve.hpp"
#include "qrelax/spectral.hpp"

namespace qrelax {

// ---------------------------------------------------------------- smoothing

enum class Normalization {
    Unit,  // rescale so n runs from 0 to 1 across the window
    Raw,   // data already in occupancy units
};

struct SmoothingOptions {
    int n_modes = 24;
    Normalization normalization = Normalization::Unit;
    double center = 0.0;               // meV; symmetry point of the even modes, n(center) = 0.5
    double overshoot_tolerance = 0.05; // larger excursions outside [0, 1] drop a mode
};

// Even cosine series for the differential about the center, integrated
// analytically with n(center) = 0.5.
struct SmoothedTrace {
    std::vector<double> coefficients;  // normalized units, per meV
    double center = 0.0;
    double half_width = 0.0;  // meV
    double scale = 1.0;       // normalized = scale * raw
    int modes_used = 0;
    double residual_rms = 0.0;   // raw units
    double noise_estimate = 0.0; // normalized units, from the fit residuals

    double occupancy(double offset) const;
    double differential(double offset) const;
};

// ---------------------------------------------------------------- data

// How measured traces became occupancy. When attached to an experiment the
// model maps pass through the same differentiate-and-smooth operator before
// the misfit, so discretisation and truncation bias cancel.
struct TraceProcessing {
    SmoothingOptions options;
    std::vector<int> modes;     // per frequency
    std::vector<double> sigma;  // empty or map-shaped, raw units
};

// Occupancy data (measured-and-smoothed or modelled) for one pulse template.
struct Experiment {
    PulseSchedule schedule;  // offset and toggle_freq are taken from the grid
    OccupancyMap occupancy;
    std::optional<TraceProcessing> processing;
};

// Differential traces dS/d(offset) for one pulse template, per-point sigma.
struct MeasuredExperiment {
    PulseSchedule schedule;
    OccupancyMap differential;
};

struct MeasuredSet {
    std::vector<MeasuredExperiment> experiments;
    double lever_arm = 0.021;                     // eV/V, applied once at ingestion
    double lever_arm_relative_uncertainty = 0.1;  // metadata only
};

// ---------------------------------------------------------------- smoothing

SmoothedTrace smooth_to_occupancy(std::span<const double> offsets, std::span<const double> trace,
                                  std::span<const double> sigma, const SmoothingOptions& options = {});

struct SmoothedSet {
    std::vector<Experiment> experiments;                // smoothed occupancy
    std::vector<std::vector<SmoothedTrace>> traces;     // [experiment][frequency]
};

SmoothedSet smooth_measured(const MeasuredSet& data, const SmoothingOptions& options = {});

// Model map as seen through the experiment's processing (identity when none).
OccupancyMap apply_processing(const Experiment& experiment, const OccupancyMap& model);

// ---------------------------------------------------------------- misfit

// sum |n1 - n2|^2 over the grid; GridMismatch unless grids are identical
double misfit(const OccupancyMap& a, const OccupancyMap& b);
double misfit(std::span<const Experiment> a, std::span<const Experiment> b);

std::vector<OccupancyMap> forward_model(std::span<const Experiment> experiments, const RateFunction& rate,
                                        const QubitParams& qubit, const MapOptions& options = {});

// ---------------------------------------------------------------- rate fit

struct RateBound {
    double lower = 0.0;  // 1/ns; 0 when open
    double upper = 0.0;  // 1/ns; +inf when open
    bool lower_open = false;
    bool upper_open = false;
};

struct FitResult {
    RateCurve best_fit;
    double misfit_min = 0.0;
    double delta_misfit = 0.0;
    std::vector<RateBound> confidence_68;
    std::vector<RateBound> confidence_95;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    std::vector<double> misfit_history;  // accepted iterates, non-increasing
    Eigen::MatrixXd jacobian;            // residual Jacobian in log-knots at the best fit
};

struct FitOptions {
    // steps of 1e-4 in ln(Gamma): a relative change of 1e-4 in each knot rate
    LeastSquaresOptions solver = LeastSquaresOptions::with(60, 1e-7, 1e-6).log_step(1e-4);
    double seed_rate = 1e-5;  // 1/ns (10 kHz)
    // knots the data cannot pin drift until they reach these bounds
    double min_rate = 1e-12;  // 1/ns (1 mHz)
    double max_rate = 1.0;    // 1/ns (1 GHz)
    MapOptions map;
    bool throw_on_nonconvergence = false;
};

// Minimises misfit over the log-knot values of a rate curve on the given
// knots, seeded with a constant rate unless an initial curve is passed.
FitResult fit_rate_curve(std::span<const Experiment> data, const QubitParams& qubit, std::vector<double> knots,
                         const FitOptions& options = {}, const std::optional<RateCurve>& initial = std::nullopt);

// Largest |eps| any waveform in the experiments reaches.
double detuning_reach(std::span<const Experiment> data);

// ---------------------------------------------------------------- confidence

struct ConfidenceOptions {
    double log_range = 10.0;     // search limit in ln(Gamma) either side of the fit
    double log_tolerance = 2e-3; // bracket width at which bisection stops
    double level_68 = 1.0;       // contour at M_min + level * delta_M
    double level_95 = 4.0;
    MapOptions map;
};

enum class DeltaMisfitStatistic {
    StandardDeviation,  // sample standard deviation of M over realizations
    Mean,               // mean M over realizations
};

struct DeltaMisfitOptions {
    int realizations = 64;
    std::uint64_t seed = 0;
    // per-point sigma in raw data units; overrides the data's sigma column
    std::optional<double> noise_sigma;
    DeltaMisfitStatistic statistic = DeltaMisfitStatistic::Mean;
};

// Spread of the misfit between the smoothed data and re-smoothed noise
// realizations of it. Per-point sigma comes from noise_sigma, else the data,
// else the smoothing residuals. Zero noise gives zero.
double estimate_delta_misfit(const MeasuredSet& data, const SmoothedSet& smoothed, const SmoothingOptions& smoothing,
                             const DeltaMisfitOptions& options = {});

// Per-knot excursions in ln(Gamma), others held at the fit, to the
// M_min + delta_M (68%) and M_min + 4 delta_M (95%) contours. A direction
// that stays below the contour across log_range is reported open.
FitResult confidence_regions(FitResult fit, std::span<const Experiment> data, const QubitParams& qubit,
                             double delta_misfit, const ConfidenceOptions& options = {});

// ---------------------------------------------------------------- model fits

struct PhenomFit {
    PhenomSpectral params;
    double cost = 0.0;  // sum of squared log-rate residuals
    int iterations = 0;
    bool converged = false;
};

// Least squares in ln(Gamma) at the target's knots (or at the given |eps|
// points) over (s, ln alpha, ln omega_c).
PhenomFit fit_phenom_params(const RateCurve& target, const QubitParams& qubit, const PhenomSpectral& init,
                            std::span<const double> epsilons = {});

struct MicroFit {
    double e0 = 0.0;               // meV
    double half_separation = 0.0;  // nm
    double implied_delta = 0.0;    // meV
    double misfit = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct MicroFitOptions {
    LeastSquaresOptions solver = LeastSquaresOptions::with(40, 1e-8, 1e-7);
    int table_knots = 96;  // dense tabulation of the microscopic rate per iterate
    double b_field = 0.0;
    double temperature = 0.3;  // K
    MapOptions map;
};

// Rate curve of the microscopic model tabulated on table_knots uniform knots
// up to e_max.
RateCurve micro_rate_curve(const DotGeometry& geometry, const Material& material, const QubitParams& qubit,
                           double e_max, int table_knots);

// Misfit minimisation over (ln E0, ln L), the tunnel coupling recomputed from
// the geometry at every iterate.
MicroFit fit_micro_params(std::span<const Experiment> data, const Material& material, double ez, double e0_init,
                          double half_separation_init, const MicroFitOptions& options = {});

// Misfit of the microscopic model at (E0, L) against the data.
double micro_misfit(std::span<const Experiment> data, const Material& material, double ez, double e0,
                    double half_separation, const MicroFitOptions& options = {});

// Least squares of the equilibrium left-occupancy formula over T. Traces in
// the right-dot convention are detected and handled.
double fit_electron_temperature(std::span<const double> epsilon, std::span<const double> occupancy, double delta);

// ---------------------------------------------------------------- synthesis

struct NoiseSpec {
    double level = 0.0;
    bool relative = true;  // sigma = level * max |dn/d(offset)| per experiment
};

struct SynthResult {
    std::vector<Experiment> clean;  // forward-modelled occupancy
    MeasuredSet measured;           // noisy differential traces with sigma
    std::uint64_t seed = 0;
};

SynthResult synth_data(const RateFunction& true_rate, const QubitParams& qubit,
                       std::span<const Experiment> grid, const NoiseSpec& noise, std::uint64_t seed,
                       const MapOptions& options = {});

// Deterministic per-stream seed from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace qrelax
