// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--reps R]
//
// Exit status is 0 when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles/oracles.hpp"
#include "qrelax/cli.hpp"
#include "qrelax/dotgeom.hpp"
#include "qrelax/dynamics.hpp"
#include "qrelax/errors.hpp"
#include "qrelax/inference.hpp"
#include "qrelax/qubit.hpp"
#include "qrelax/spectral.hpp"

using namespace qrelax;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
    return out;
}

// Offsets of local extrema of dn/d(offset), in the sign of the largest one, above `floor` times the largest.
std::vector<double> peaks(std::span<const double> offsets, std::span<const double> dn, double floor = 0.2) {
    double extreme = 0.0;
    for (double v : dn)
        if (std::fabs(v) > std::fabs(extreme)) extreme = v;
    const double sign = extreme < 0.0 ? -1.0 : 1.0;
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < dn.size(); ++i) {
        const double v = sign * dn[i];
        if (v > floor * sign * extreme && v > sign * dn[i - 1] && v >= sign * dn[i + 1]) out.push_back(offsets[i]);
    }
    return out;
}

// ---------------------------------------------------------------- 1

Outcome criterion_1() {
    const auto t0 = Clock::now();
    const QubitParams qubit(1e-3, 0.3);
    const nlohmann::json preset = cli::preset("fig3a");
    std::vector<double> freqs;
    for (const auto& f : preset.at("schedule").at("freqs_Hz")) freqs.push_back(f.get<double>());
    const auto offsets = linspace(-0.4, 0.4, 100);
    PulseSchedule tmpl;
    tmpl.toggle_amplitude = 0.21;
    tmpl.dither_amplitude = 0.0;
    tmpl.steps_per_period = 4800;

    auto map_for = [&](double s, double alpha) {
        const SpectralModel m = PhenomSpectral::from_cutoff_energy(s, alpha, 0.5);
        return differential_map(
            occupancy_map(offsets, freqs, [&](double e) { return relaxation_rate(e, qubit, m); }, qubit, tmpl));
    };
    const OccupancyMap ohmic = map_for(1.0, 1e-4);
    const double runtime = seconds_since(t0);
    const OccupancyMap super = map_for(5.0, 0.2);

    bool two_everywhere = true;
    double worst = 0.0;
    for (std::size_t fi = 0; fi < freqs.size(); ++fi) {
        const auto p = peaks(offsets, ohmic.row(fi));
        if (p.size() != 2) {
            two_everywhere = false;
            continue;
        }
        worst = std::max(worst, std::fabs((p[1] - p[0]) / 0.21 - 1.0));
    }
    const auto top = peaks(offsets, super.row(freqs.size() - 1));
    const auto low = peaks(offsets, super.row(0));
    const bool pass = two_everywhere && worst <= 0.1 && top.size() == 1 && low.size() == 2 && runtime < 60.0;
    return {pass, fmt("s=1: two peaks at all %zu f, worst separation error %.1f%%; s=5: %zu peak(s) at %.0f Hz, "
                      "%zu at %.0f Hz; 100x8 grid in %.1f s",
                      freqs.size(), 100 * worst, top.size(), freqs.back(), low.size(), freqs.front(), runtime)};
}

// ---------------------------------------------------------------- 2

Outcome criterion_2() {
    const MicroSpectral m(DotGeometry(1.7, ez_from_thickness(3.0), 45.0));
    const double w = energy_to_omega(1e-4);
    const double rl = j_long(2 * w, m) / j_long(w, m);
    const double rt = j_trans(2 * w, m) / j_trans(w, m);
    const bool pass = std::fabs(rl / 32 - 1) < 0.01 && std::fabs(rt / 32 - 1) < 0.01;
    return {pass, fmt("J_L(2w)/J_L(w) = %.4f, J_T(2w)/J_T(w) = %.4f", rl, rt)};
}

// ---------------------------------------------------------------- 3

Outcome criterion_3() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> e0(1.0, 3.0), L(20.0, 60.0), b(2.0, 4.0);
    double worst = 0.0;
    for (int g = 0; g < 3; ++g) {
        const MicroSpectral m(DotGeometry(e0(rng), ez_from_thickness(b(rng)), L(rng)));
        for (double e : {0.01, 0.05, 0.2, 0.5}) {
            const double w = energy_to_omega(e);
            const double ref = oracle::j_micro_bruteforce(w, m);
            worst = std::max(worst, std::fabs(j_micro(w, m) / ref - 1.0));
        }
    }
    return {worst < 1e-6, fmt("worst relative difference %.2e over 3 geometries x 4 energies", worst)};
}

// ---------------------------------------------------------------- 4

Outcome criterion_4() {
    const DotGeometry g(1.7, ez_from_thickness(3.0), 45.0);
    const double d0 = tunnel_coupling(g, 0.0);
    const double fd = oracle::fd_double_well_splitting(g);
    double spread = 0.0;
    for (double e = -0.3; e <= 0.3 + 1e-12; e += 0.01) spread = std::max(spread, std::fabs(tunnel_coupling(g, e) / d0 - 1));
    const bool pass = d0 >= 0.5e-3 && d0 <= 2e-3 && std::fabs(d0 / fd - 1) < 0.2 && spread < 0.01;
    return {pass, fmt("Delta = %.3f ueV, finite-difference splitting %.3f ueV (%.1f%%), variation %.2f%% over |eps| <= "
                      "0.3 meV",
                      d0 * 1e3, fd * 1e3, 100 * (d0 / fd - 1), 100 * spread)};
}

// ---------------------------------------------------------------- 5

Outcome criterion_5() {
    const QubitParams qubit(1e-3, 0.3);
    double worst = 0.0;
    for (double e : linspace(-0.5, 0.5, 101)) {
        PulseSchedule s;
        s.offset = e;
        s.steps_per_period = 64;
        const double n = mean_left_occupancy(s, [](double) { return hz_to_rate_per_ns(1e4); }, qubit);
        worst = std::max(worst, std::fabs(n - equilibrium_occupancy_L(e, 1e-3, 0.3)));
    }
    return {worst < 1e-9, fmt("sup difference %.2e over 101 offsets", worst)};
}

// ---------------------------------------------------------------- 6

Outcome criterion_6() {
    const QubitParams qubit(1e-3, 0.3);
    const auto offsets = linspace(-0.5, 0.5, 201);
    const double f = 215.0;
    PulseSchedule tmpl;
    tmpl.toggle_amplitude = 0.21;
    tmpl.toggle_freq = f;
    tmpl.steps_per_period = 960;
    const double rate = hz_to_rate_per_ns(1e6 * f);
    const OccupancyMap n = occupancy_map(offsets, std::vector<double>{f}, [rate](double) { return rate; }, qubit, tmpl);
    double worst = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const double ref = 0.5 * (equilibrium_occupancy_L(offsets[i] + 0.105, 1e-3, 0.3) +
                                  equilibrium_occupancy_L(offsets[i] - 0.105, 1e-3, 0.3));
        worst = std::max(worst, std::fabs(n.at(0, i) - ref));
    }
    const auto p = peaks(offsets, differential_map(n).row(0));
    const double step = offsets[1] - offsets[0];
    const bool sep_ok = p.size() == 2 && std::fabs(p[1] - p[0] - 0.21) <= step + 1e-12;
    return {worst < 1e-4 && sep_ok,
            fmt("sup difference %.2e; peak separation %.4f meV vs 0.21 (grid step %.3f)", worst,
                p.size() == 2 ? p[1] - p[0] : NAN, step)};
}

// ---------------------------------------------------------------- 7

Outcome criterion_7() {
    const QubitParams qubit(1e-3, 0.3);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_sum = 0.0;
    double most_negative = 0.0;
    double worst_conservation = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const double e1 = -0.8 + 1.6 * u(rng), e2 = -0.8 + 1.6 * u(rng);
        const double rate = std::pow(10.0, -12.0 + 13.0 * u(rng));
        const double dt = std::pow(10.0, 6.0 * u(rng));
        PulseSchedule s;
        s.offset = -0.5 + u(rng);
        s.toggle_amplitude = 0.6 * u(rng);
        s.dither_amplitude = 0.1 * u(rng);
        s.toggle_freq = 43.0 * (1 + static_cast<int>(8 * u(rng)));
        s.steps_per_period = compatible_steps(64, s.toggles_per_dither());
        const double a = std::pow(10.0, -4.0 + 4.0 * u(rng));
        const SpectralModel model = PhenomSpectral::from_cutoff_energy(1.0 + 4.0 * u(rng), a, 0.1 + 0.5 * u(rng));
        const RateFunction rf = [&](double e) { return relaxation_rate(e, qubit, model); };

        const TransferMatrix mats[] = {basis_change_matrix(e1, e2, qubit), relax_matrix(e1, dt, rate, qubit, false),
                                       relax_matrix(e1, dt, rate, qubit, true), period_map(s, rf, qubit)};
        for (const auto& m : mats) {
            for (int c = 0; c < 2; ++c) worst_sum = std::max(worst_sum, std::fabs(m.column_sum(c) - 1.0));
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 2; ++c) most_negative = std::min(most_negative, m(r, c));
            }
        }
        try {
            const PopulationPair fp = fixed_point(mats[3]);
            most_negative = std::min({most_negative, fp.rho00, fp.rho11});
            worst_conservation = std::max(worst_conservation, std::fabs(fp.rho00 + fp.rho11 - 1.0));
        } catch (const DegenerateMap&) {
        }
        const double x = u(rng);
        const PopulationPair p = (mats[3] * mats[0] * mats[1] * mats[2]).apply({x, 1 - x});
        worst_conservation = std::max(worst_conservation, std::fabs(p.rho00 + p.rho11 - 1.0));
    }
    const bool pass = worst_sum < 1e-10 && most_negative >= 0.0 && worst_conservation < 1e-10;
    return {pass, fmt("%d draws: worst column-sum error %.2e, smallest entry %.2e, worst population drift %.2e", draws,
                      worst_sum, most_negative, worst_conservation)};
}

// ---------------------------------------------------------------- 8, 9

struct RoundTrip {
    int informative = 0;
    int in68 = 0;
    int in95 = 0;
    std::vector<double> missed95;  // knots outside the 95% band
    double e0 = 0.0;
    double half_separation = 0.0;
    double implied_delta = 0.0;
    bool converged = false;
    double seconds = 0.0;
};

struct PaperSetup {
    DotGeometry geometry{1.7, ez_from_thickness(3.0), 45.0};
    QubitParams qubit{1e-3, 0.3};
    std::vector<Experiment> grid;
    RateCurve truth;
    double f_min = 0.0;
    double f_max = 0.0;

    PaperSetup() {
        qubit = QubitParams(tunnel_coupling(geometry, 0.0), 0.3);
        const auto p = cli::preset("paper").at("schedule");
        std::vector<double> freqs;
        for (const auto& f : p.at("freqs_Hz")) freqs.push_back(f.get<double>());
        const auto offsets =
            linspace(p.at("offset_min_meV").get<double>(), p.at("offset_max_meV").get<double>(), p.at("offset_count"));
        for (const auto& a : p.at("toggle_amplitudes_meV")) {
            PulseSchedule s;
            s.toggle_amplitude = a.get<double>();
            s.dither_amplitude = p.at("dither_amplitude_meV").get<double>();
            s.steps_per_period = p.at("steps_per_period").get<int>();
            grid.push_back({s, OccupancyMap(offsets, freqs), std::nullopt});
        }
        truth = micro_rate_curve(geometry, Material{}, qubit, detuning_reach(grid), 96);
        f_min = freqs.front();
        f_max = freqs.back();
    }
};

RoundTrip round_trip(const PaperSetup& setup, std::uint64_t seed, bool micro, const std::optional<RateCurve>& warm) {
    const auto t0 = Clock::now();
    const SynthResult syn =
        synth_data([&](double e) { return setup.truth(e); }, setup.qubit, setup.grid, {0.01, true}, seed);
    const SmoothedSet smoothed = smooth_measured(syn.measured);
    DeltaMisfitOptions dmo;
    dmo.seed = derive_seed(seed, 1000);
    const double delta_m = estimate_delta_misfit(syn.measured, smoothed, {}, dmo);
    FitResult fit = fit_rate_curve(smoothed.experiments, setup.qubit, {}, {}, warm);
    fit = confidence_regions(std::move(fit), smoothed.experiments, setup.qubit, delta_m);

    RoundTrip out;
    out.converged = fit.converged;
    for (std::size_t j = 0; j < fit.best_fit.size(); ++j) {
        const double e = fit.best_fit.knots()[j];
        const double g = setup.truth(e);
        const double hz = rate_per_ns_to_hz(g);
        if (hz < 0.1 * setup.f_min || hz > 10.0 * setup.f_max) continue;
        ++out.informative;
        const auto inside = [g](const RateBound& b) {
            return (b.lower_open || g >= b.lower) && (b.upper_open || g <= b.upper);
        };
        out.in68 += inside(fit.confidence_68[j]);
        if (inside(fit.confidence_95[j])) {
            ++out.in95;
        } else {
            out.missed95.push_back(e);
        }
    }
    if (micro) {
        const MicroFit mf = fit_micro_params(smoothed.experiments, Material{}, ez_from_thickness(3.0), 1.5, 42.0);
        out.e0 = mf.e0;
        out.half_separation = mf.half_separation;
        out.implied_delta = mf.implied_delta;
    }
    out.seconds = seconds_since(t0);
    return out;
}

Outcome criterion_8(const PaperSetup& setup) {
    const RoundTrip r = round_trip(setup, 1, true, std::nullopt);
    const double de0 = r.e0 / 1.7 - 1.0, dl = r.half_separation / 45.0 - 1.0;
    const bool pass = r.converged && r.in95 == r.informative && std::fabs(de0) < 0.1 && std::fabs(dl) < 0.1 &&
                      r.seconds < 600.0;
    std::string missed;
    for (double e : r.missed95) missed += fmt(" %.3f", e);
    return {pass, fmt("truth inside the 95%% band at %d/%d informative knots%s%s; E0 = %.3f meV (%+.1f%%), L = %.2f nm "
                      "(%+.1f%%), implied Delta = %.3f ueV; %.0f s",
                      r.in95, r.informative, missed.empty() ? "" : ", missed at eps =", missed.c_str(), r.e0,
                      100 * de0, r.half_separation, 100 * dl, r.implied_delta * 1e3, r.seconds)};
}

Outcome criterion_9(const PaperSetup& setup, int reps) {
    const auto t0 = Clock::now();
    // each repetition starts the fit from the truth-free default seed curve
    int informative = 0, in68 = 0, in95 = 0;
    for (int r = 0; r < reps; ++r) {
        const RoundTrip rt = round_trip(setup, derive_seed(9, static_cast<std::uint64_t>(r)), false, std::nullopt);
        informative += rt.informative;
        in68 += rt.in68;
        in95 += rt.in95;
        std::printf("  repetition %2d: 68%% %d/%d, 95%% %d/%d (%.0f s)\n", r + 1, rt.in68, rt.informative, rt.in95,
                    rt.informative, rt.seconds);
        std::fflush(stdout);
    }
    const double frac = informative ? static_cast<double>(in68) / informative : 0.0;
    return {frac >= 0.5, fmt("%d repetitions: truth inside the 68%% band at %.0f%% of %d informative knots (95%%: "
                             "%.0f%%); %.0f s",
                             reps, 100 * frac, informative, 100.0 * in95 / std::max(informative, 1),
                             seconds_since(t0))};
}

// ---------------------------------------------------------------- 10

Outcome criterion_10() {
    const double t = diabaticity_threshold(0.21, 1e-3);
    const double g = backaction_rate(2e-9, 2e-9 - 0.25e-12);
    const bool pass = t >= 80.0 && t <= 96.0 && is_diabatic(16.0, 0.21, 1e-3) && g >= 1.0 && g <= 100.0;
    return {pass, fmt("threshold %.1f ns, 16 ns ramp %s; back-action %.1f Hz", t,
                      is_diabatic(16.0, 0.21, 1e-3) ? "diabatic" : "adiabatic", g)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    int reps = 20;
    app.add_option("--only", only, "run only these criteria");
    app.add_option("--reps", reps, "Monte-Carlo repetitions for the coverage criterion")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);
    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

    std::optional<PaperSetup> paper;
    auto setup = [&]() -> const PaperSetup& {
        if (!paper) paper.emplace();
        return *paper;
    };
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, criterion_1},
        {2, criterion_2},
        {3, criterion_3},
        {4, criterion_4},
        {5, criterion_5},
        {6, criterion_6},
        {7, criterion_7},
        {8, [&] { return criterion_8(setup()); }},
        {9, [&] { return criterion_9(setup(), reps); }},
        {10, criterion_10},
    };
    int failed = 0;
    for (const auto& [n, run] : criteria) {
        if (!wanted(n)) continue;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %2d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
