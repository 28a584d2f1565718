#include "qrelax/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qrelax/errors.hpp"
#include "qrelax/inference.hpp"
#include "qrelax/io.hpp"

extern char** environ;

namespace qrelax::cli {

using nlohmann::json;
namespace fs = std::filesystem;

json default_config() {
    return json{
        {"qubit", {{"delta_meV", 1e-3}, {"temperature_K", 0.3}, {"delta_from_geometry", false}}},
        {"spectral",
         {{"model", "phenom"},
          {"s_exponent", 5.0},
          {"coupling_alpha", 0.29},
          {"cutoff_meV", 0.25},
          {"quadrature_tol", 1e-8},
          {"table_knots", 96}}},
        {"geometry", {{"e0_meV", 1.7}, {"half_separation_nm", 45.0}, {"thickness_nm", 3.0}, {"b_field_T", 0.0}}},
        {"material",
         {{"xi_d_eV", -10.7},
          {"xi_u_eV", 9.29},
          {"mass_density_kg_m3", 2330.0},
          {"c_long_m_s", 9000.0},
          {"c_trans_m_s", 5410.0}}},
        {"schedule",
         {{"toggle_amplitudes_meV", {0.21}},
          {"dither_amplitude_meV", 0.0},
          {"dither_freq_Hz", 43.0},
          {"ramp_time_ns", 16.0},
          {"steps_per_period", 4096},
          {"freqs_Hz", {215.0, 430.0, 860.0, 1720.0, 3440.0, 6880.0, 12900.0}},
          {"offset_min_meV", -0.6},
          {"offset_max_meV", 0.6},
          {"offset_count", 61}}},
        {"spectral_grid", {{"epsilon_min_meV", 0.0}, {"epsilon_max_meV", 0.6}, {"count", 61}}},
        {"fit",
         {{"knots", 12},
          {"smoothing_modes", 24},
          {"normalization", "unit"},
          {"center_meV", 0.0},
          {"realizations", 64},
          {"delta_statistic", "mean"},
          {"max_iterations", 60},
          {"seed_rate_Hz", 1e4},
          {"phenom_init", {{"s_exponent", 3.0}, {"coupling_alpha", 0.1}, {"cutoff_meV", 0.3}}},
          {"micro_init", {{"e0_meV", 1.5}, {"half_separation_nm", 42.0}}}}},
        {"synth", {{"noise_level", 0.01}, {"noise_relative", true}}},
        {"rng_seed", 0},
        {"threads", 1},
        {"output_dir", "out"},
    };
}

json preset(const std::string& name) {
    if (name == "paper") {
        return json{
            {"qubit", {{"delta_from_geometry", true}}},
            {"spectral", {{"model", "micro"}}},
            {"schedule",
             {{"toggle_amplitudes_meV", {0.21, 0.53}},
              {"dither_amplitude_meV", 0.06},
              {"steps_per_period", 4800},
              {"freqs_Hz", {215.0, 430.0, 860.0, 1720.0, 3440.0, 6880.0, 12900.0}},
              {"offset_min_meV", -0.6},
              {"offset_max_meV", 0.6},
              {"offset_count", 61}}},
            {"synth", {{"noise_level", 0.01}, {"noise_relative", true}}},
        };
    }
    if (name == "fig3a" || name == "fig3b") {
        const bool ohmic = name == "fig3a";
        return json{
            {"qubit", {{"delta_meV", 1e-3}, {"temperature_K", 0.3}, {"delta_from_geometry", false}}},
            {"spectral",
             {{"model", "phenom"},
              {"s_exponent", ohmic ? 1.0 : 5.0},
              {"coupling_alpha", ohmic ? 1e-4 : 0.2},
              {"cutoff_meV", 0.5}}},
            {"schedule",
             {{"toggle_amplitudes_meV", {0.21}},
              {"dither_amplitude_meV", 0.0},
              {"steps_per_period", 4800},
              {"freqs_Hz", {215.0, 430.0, 860.0, 1720.0, 3440.0, 6880.0, 10320.0, 12900.0}},
              {"offset_min_meV", -0.4},
              {"offset_max_meV", 0.4},
              {"offset_count", 100}}},
        };
    }
    throw ConfigError("unknown preset '" + name + "' (expected paper, fig3a or fig3b)");
}

namespace {

// Merge src into dst, rejecting keys the defaults do not know.
void merge_known(json& dst, const json& src, const std::string& path) {
    if (!src.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!dst.contains(it.key())) throw ConfigError("unknown config key " + key);
        json& d = dst[it.key()];
        if (d.is_object()) {
            merge_known(d, it.value(), key);
        } else {
            d = it.value();
        }
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

const json& at_path(const json& cfg, const std::string& path) {
    const json* node = &cfg;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!node->is_object() || !node->contains(part)) throw ConfigError("missing config key " + path);
        node = &(*node)[part];
    }
    return *node;
}

double num(const json& cfg, const std::string& path) {
    const json& v = at_path(cfg, path);
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    return v.get<double>();
}

int integer(const json& cfg, const std::string& path) {
    const json& v = at_path(cfg, path);
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return v.get<int>();
}

bool flag(const json& cfg, const std::string& path) {
    const json& v = at_path(cfg, path);
    if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
    return v.get<bool>();
}

std::string text(const json& cfg, const std::string& path) {
    const json& v = at_path(cfg, path);
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    return v.get<std::string>();
}

std::vector<double> numbers(const json& cfg, const std::string& path) {
    const json& v = at_path(cfg, path);
    if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(path + ": expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

// ---------------------------------------------------------------- builders

struct Setup {
    json cfg;
    fs::path out_dir;
    MapOptions map;
};

DotGeometry build_geometry(const json& cfg) {
    return DotGeometry(num(cfg, "geometry.e0_meV"), ez_from_thickness(num(cfg, "geometry.thickness_nm")),
                       num(cfg, "geometry.half_separation_nm"), num(cfg, "geometry.b_field_T"));
}

Material build_material(const json& cfg) {
    Material m;
    m.xi_d = num(cfg, "material.xi_d_eV");
    m.xi_u = num(cfg, "material.xi_u_eV");
    m.mass_density = num(cfg, "material.mass_density_kg_m3");
    m.c_long = num(cfg, "material.c_long_m_s");
    m.c_trans = num(cfg, "material.c_trans_m_s");
    m.validate();
    return m;
}

QubitParams build_qubit(const json& cfg) {
    const double delta =
        flag(cfg, "qubit.delta_from_geometry") ? tunnel_coupling(build_geometry(cfg), 0.0) : num(cfg, "qubit.delta_meV");
    return QubitParams(delta, num(cfg, "qubit.temperature_K"));
}

PhenomSpectral build_phenom(const json& cfg) {
    return PhenomSpectral::from_cutoff_energy(num(cfg, "spectral.s_exponent"), num(cfg, "spectral.coupling_alpha"),
                                              num(cfg, "spectral.cutoff_meV"));
}

MicroSpectral build_micro(const json& cfg) {
    return MicroSpectral(build_geometry(cfg), build_material(cfg), num(cfg, "spectral.quadrature_tol"));
}

std::string model_kind(const json& cfg) {
    const std::string m = text(cfg, "spectral.model");
    if (m != "phenom" && m != "micro" && m != "both") {
        throw ConfigError("spectral.model: expected phenom, micro or both");
    }
    return m;
}

std::vector<Experiment> build_grid(const json& cfg) {
    const int count = integer(cfg, "schedule.offset_count");
    if (count < 3) throw ConfigError("schedule.offset_count must be >= 3");
    const double lo = num(cfg, "schedule.offset_min_meV");
    const double hi = num(cfg, "schedule.offset_max_meV");
    if (!(hi > lo)) throw ConfigError("schedule.offset_max_meV must exceed schedule.offset_min_meV");
    std::vector<double> offsets;
    for (int i = 0; i < count; ++i) offsets.push_back(lo + (hi - lo) * i / (count - 1));
    std::vector<double> freqs = numbers(cfg, "schedule.freqs_Hz");
    if (freqs.empty()) throw ConfigError("schedule.freqs_Hz must not be empty");
    std::sort(freqs.begin(), freqs.end());
    const auto amps = numbers(cfg, "schedule.toggle_amplitudes_meV");
    if (amps.empty()) throw ConfigError("schedule.toggle_amplitudes_meV must not be empty");

    std::vector<Experiment> out;
    for (double a : amps) {
        PulseSchedule s;
        s.toggle_amplitude = a;
        s.dither_amplitude = num(cfg, "schedule.dither_amplitude_meV");
        s.dither_freq = num(cfg, "schedule.dither_freq_Hz");
        s.ramp_time = num(cfg, "schedule.ramp_time_ns");
        s.steps_per_period = integer(cfg, "schedule.steps_per_period");
        s.toggle_freq = freqs.front();
        for (double f : freqs) {
            PulseSchedule t = s;
            t.toggle_freq = f;
            t.validate();
        }
        OccupancyMap grid(offsets, freqs);
        try {
            grid.validate(false);
        } catch (const DataFormatError& e) {
            throw ConfigError(std::string("schedule: ") + e.what());
        }
        out.push_back({s, std::move(grid), std::nullopt});
    }
    return out;
}

// Rate used for forward modelling: phenomenological directly, microscopic via
// a dense tabulation (one quadrature per knot rather than per time step).
RateFunction build_rate(const json& cfg, const QubitParams& qubit, double reach) {
    const std::string kind = model_kind(cfg);
    if (kind == "both") throw ConfigError("spectral.model: simulate and synth need phenom or micro");
    if (kind == "phenom") {
        const SpectralModel m = build_phenom(cfg);
        return [m, qubit](double eps) { return relaxation_rate(eps, qubit, m); };
    }
    const RateCurve curve = micro_rate_curve(build_geometry(cfg), build_material(cfg), qubit, reach,
                                             integer(cfg, "spectral.table_knots"));
    return [curve](double eps) { return curve(eps); };
}

SmoothingOptions build_smoothing(const json& cfg) {
    SmoothingOptions s;
    s.n_modes = integer(cfg, "fit.smoothing_modes");
    const std::string norm = text(cfg, "fit.normalization");
    if (norm == "unit") {
        s.normalization = Normalization::Unit;
    } else if (norm == "raw") {
        s.normalization = Normalization::Raw;
    } else {
        throw ConfigError("fit.normalization: expected unit or raw");
    }
    s.center = num(cfg, "fit.center_meV");
    return s;
}

void write_schedules(json& j, const std::vector<Experiment>& grid) {
    j["experiments"] = json::array();
    for (const auto& e : grid) j["experiments"].push_back(io::to_json(e.schedule));
}

// ---------------------------------------------------------------- commands

int cmd_spectral(const Setup& s, bool check_omega5, std::ostream& out) {
    const json& cfg = s.cfg;
    const int count = integer(cfg, "spectral_grid.count");
    if (count < 1) throw ConfigError("spectral_grid.count must be >= 1 (empty grid)");
    const double lo = num(cfg, "spectral_grid.epsilon_min_meV");
    const double hi = num(cfg, "spectral_grid.epsilon_max_meV");
    if (count > 1 && !(hi > lo)) throw ConfigError("spectral_grid.epsilon_max_meV must exceed epsilon_min_meV");
    const std::string kind = model_kind(cfg);
    const QubitParams qubit = build_qubit(cfg);

    std::vector<std::pair<std::string, SpectralModel>> models;
    if (kind != "micro") models.emplace_back("phenom", build_phenom(cfg));
    if (kind != "phenom") models.emplace_back("micro", build_micro(cfg));

    fs::create_directories(s.out_dir);
    std::ofstream csv(s.out_dir / "spectral.csv", std::ios::binary);
    csv << "epsilon_meV,gap_meV,omega_rad_per_ns";
    for (const auto& [name, m] : models) csv << ",J_" << name << "_meV2ns,rate_" << name << "_Hz";
    csv << '\n';
    for (int i = 0; i < count; ++i) {
        const double eps = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
        const double gap = energy_gap(eps, qubit.delta);
        const double omega = energy_to_omega(gap);
        csv << io::format_number(eps) << ',' << io::format_number(gap) << ',' << io::format_number(omega);
        for (const auto& [name, m] : models) {
            const double j = spectral_density(omega, m);
            csv << ',' << io::format_number(j) << ','
                << io::format_number(rate_per_ns_to_hz(relaxation_rate_from_density(gap, j, qubit)));
        }
        csv << '\n';
    }
    out << "wrote " << (s.out_dir / "spectral.csv").string() << '\n';

    if (check_omega5) {
        const MicroSpectral micro = build_micro(cfg);
        const double w = energy_to_omega(1e-4);
        const double rl = j_long(2.0 * w, micro) / j_long(w, micro);
        const double rt = j_trans(2.0 * w, micro) / j_trans(w, micro);
        const bool pass = std::fabs(rl / 32.0 - 1.0) < 0.01 && std::fabs(rt / 32.0 - 1.0) < 0.01;
        io::write_json(s.out_dir / "omega5.json", {{"hbar_omega_meV", 1e-4},
                                                    {"ratio_long", rl},
                                                    {"ratio_trans", rt},
                                                    {"expected", 32.0},
                                                    {"within_1_percent", pass}});
        out << "omega5 check: J_L(2w)/J_L(w) = " << rl << ", J_T(2w)/J_T(w) = " << rt << (pass ? " PASS" : " FAIL")
            << '\n';
    }
    return kSuccess;
}

int cmd_simulate(const Setup& s, std::ostream& out) {
    const json& cfg = s.cfg;
    const QubitParams qubit = build_qubit(cfg);
    const auto grid = build_grid(cfg);
    const RateFunction rate = build_rate(cfg, qubit, detuning_reach(grid));
    const auto maps = forward_model(grid, rate, qubit, s.map);
    json summary;
    summary["delta_meV"] = qubit.delta;
    write_schedules(summary, grid);
    for (std::size_t i = 0; i < maps.size(); ++i) {
        io::write_map_csv(s.out_dir / ("occupancy_" + std::to_string(i) + ".csv"), maps[i], "n_left");
        io::write_map_csv(s.out_dir / ("differential_" + std::to_string(i) + ".csv"), differential_map(maps[i]),
                          "dn_doffset");
    }
    io::write_json(s.out_dir / "simulate.json", summary);
    out << "wrote " << maps.size() << " occupancy map(s) to " << s.out_dir.string() << '\n';
    return kSuccess;
}

int cmd_synth(const Setup& s, std::uint64_t seed, std::ostream& out) {
    const json& cfg = s.cfg;
    const QubitParams qubit = build_qubit(cfg);
    const auto grid = build_grid(cfg);
    const double reach = detuning_reach(grid);
    const RateFunction rate = build_rate(cfg, qubit, reach);
    NoiseSpec noise{num(cfg, "synth.noise_level"), flag(cfg, "synth.noise_relative")};
    const SynthResult syn = synth_data(rate, qubit, grid, noise, seed, s.map);

    json meta;
    meta["seed"] = seed;
    meta["noise_level"] = noise.level;
    meta["noise_relative"] = noise.relative;
    meta["delta_meV"] = qubit.delta;
    meta["temperature_K"] = qubit.temperature;
    io::write_dataset(s.out_dir, syn.measured, meta);
    for (std::size_t i = 0; i < syn.clean.size(); ++i) {
        io::write_map_csv(s.out_dir / ("clean_occupancy_" + std::to_string(i) + ".csv"), syn.clean[i].occupancy,
                          "n_left");
    }
    std::ofstream truth(s.out_dir / "truth_rates.csv", std::ios::binary);
    truth << "epsilon_meV,gap_meV,rate_Hz\n";
    for (int i = 0; i <= 100; ++i) {
        const double e = reach * i / 100.0;
        truth << io::format_number(e) << ',' << io::format_number(energy_gap(e, qubit.delta)) << ','
              << io::format_number(rate_per_ns_to_hz(rate(e))) << '\n';
    }
    out << "wrote dataset with " << syn.measured.experiments.size() << " trace file(s) to " << s.out_dir.string()
        << '\n';
    return kSuccess;
}

int cmd_fit(const Setup& s, const fs::path& data_path, std::uint64_t seed, bool phenom, bool micro, std::ostream& out) {
    const json& cfg = s.cfg;
    const MeasuredSet data = io::read_dataset(data_path);
    const QubitParams qubit = build_qubit(cfg);
    const SmoothingOptions smoothing = build_smoothing(cfg);
    const SmoothedSet smoothed = smooth_measured(data, smoothing);

    DeltaMisfitOptions dmo;
    dmo.realizations = integer(cfg, "fit.realizations");
    dmo.seed = seed;
    const std::string stat = text(cfg, "fit.delta_statistic");
    if (stat == "mean") {
        dmo.statistic = DeltaMisfitStatistic::Mean;
    } else if (stat == "std") {
        dmo.statistic = DeltaMisfitStatistic::StandardDeviation;
    } else {
        throw ConfigError("fit.delta_statistic: expected mean or std");
    }
    const double delta_m = estimate_delta_misfit(data, smoothed, smoothing, dmo);

    FitOptions fo;
    fo.solver.max_iterations = integer(cfg, "fit.max_iterations");
    fo.seed_rate = hz_to_rate_per_ns(num(cfg, "fit.seed_rate_Hz"));
    fo.map = s.map;
    const int knot_count = integer(cfg, "fit.knots");
    if (knot_count < 2) throw ConfigError("fit.knots must be >= 2");
    const auto knots = uniform_knots(detuning_reach(smoothed.experiments), knot_count);
    FitResult fit = fit_rate_curve(smoothed.experiments, qubit, knots, fo);
    ConfidenceOptions co;
    co.map = s.map;
    fit = confidence_regions(std::move(fit), smoothed.experiments, qubit, delta_m, co);

    json result = io::to_json(fit, qubit.delta);
    result["delta_meV"] = qubit.delta;
    if (phenom) {
        std::vector<double> pts;
        for (std::size_t j = 0; j < fit.best_fit.size(); ++j) {
            const auto& b = fit.confidence_95[j];
            if (!b.lower_open && !b.upper_open) pts.push_back(fit.best_fit.knots()[j]);
        }
        if (pts.size() < 3) pts = fit.best_fit.knots();
        const PhenomSpectral init = PhenomSpectral::from_cutoff_energy(num(cfg, "fit.phenom_init.s_exponent"),
                                                                       num(cfg, "fit.phenom_init.coupling_alpha"),
                                                                       num(cfg, "fit.phenom_init.cutoff_meV"));
        const PhenomFit pf = fit_phenom_params(fit.best_fit, qubit, init, pts);
        result["phenom"] = {{"s_exponent", pf.params.s_exponent},
                            {"coupling_alpha", pf.params.coupling_alpha},
                            {"cutoff_meV", pf.params.cutoff_energy()},
                            {"log_rate_cost", pf.cost},
                            {"epsilons_meV", pts}};
    }
    if (micro) {
        MicroFitOptions mo;
        mo.temperature = qubit.temperature;
        mo.b_field = num(cfg, "geometry.b_field_T");
        mo.map = s.map;
        const MicroFit mf = fit_micro_params(smoothed.experiments, build_material(cfg),
                                             ez_from_thickness(num(cfg, "geometry.thickness_nm")),
                                             num(cfg, "fit.micro_init.e0_meV"),
                                             num(cfg, "fit.micro_init.half_separation_nm"), mo);
        result["micro"] = {{"e0_meV", mf.e0},
                           {"half_separation_nm", mf.half_separation},
                           {"implied_delta_meV", mf.implied_delta},
                           {"misfit", mf.misfit},
                           {"iterations", mf.iterations}};
    }
    io::write_json(s.out_dir / "fit.json", result);
    io::write_rate_csv(s.out_dir / "rates.csv", fit, qubit.delta);
    out << "fit: misfit " << fit.misfit_min << ", delta_M " << delta_m << ", " << fit.iterations << " iterations"
        << (fit.converged ? "" : " (not converged)") << '\n';
    return fit.converged ? kSuccess : kNotConverged;
}

}  // namespace

void apply_env_overrides(json& config, const std::vector<std::string>& environment) {
    const std::string prefix = "QRELAX_";
    for (const auto& entry : environment) {
        if (entry.rfind(prefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = entry.substr(prefix.size(), eq - prefix.size());
        const std::string value = entry.substr(eq + 1);

        json* node = &config;
        std::string path;
        std::size_t pos = 0;
        while (true) {
            const auto next = name.find("__", pos);
            const std::string part = lower(name.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
            if (!node->is_object()) throw ConfigError("environment " + entry + ": not an object at " + path);
            json* found = nullptr;
            for (auto it = node->begin(); it != node->end(); ++it) {
                if (lower(it.key()) == part) {
                    path += (path.empty() ? "" : ".") + it.key();
                    found = &it.value();
                    break;
                }
            }
            if (!found) throw ConfigError("environment " + entry.substr(0, eq) + ": unknown config key");
            node = found;
            if (next == std::string::npos) break;
            pos = next + 2;
        }
        json parsed = json::parse(value, nullptr, false);
        *node = parsed.is_discarded() ? json(value) : parsed;
    }
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Charge-qubit relaxation: spectral densities, forward model, synthesis and rate fitting", "qrelax"};
    app.require_subcommand(1);
    std::string config_path, out_dir, preset_name, data_path;
    long long seed = -1;
    int threads = 0;
    bool check_omega5 = false, phenom = false, micro = false;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "RNG seed (overrides rng_seed)");
    app.add_option("--preset", preset_name, "named parameter set: paper, fig3a, fig3b");
    app.add_option("--threads", threads, "worker threads for grid evaluation");

    auto* spectral = app.add_subcommand("spectral", "tabulate J(w) and the relaxation rate");
    spectral->add_flag("--check-omega5", check_omega5, "report J(2w)/J(w) at 1e-4 meV");
    auto* simulate = app.add_subcommand("simulate", "forward-model occupancy maps");
    auto* synth = app.add_subcommand("synth", "write a synthetic differential dataset");
    auto* fit = app.add_subcommand("fit", "fit the relaxation rate to a dataset");
    fit->add_option("--data", data_path, "dataset.json manifest")->required();
    fit->add_flag("--phenom", phenom, "also fit phenomenological parameters to the fitted rate");
    fit->add_flag("--micro", micro, "also fit confinement energy and half-separation");
    for (auto* sub : {spectral, simulate, synth, fit}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }

    try {
        Setup s;
        s.cfg = default_config();
        if (!preset_name.empty()) merge_known(s.cfg, preset(preset_name), "");
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw ConfigError("cannot open config " + config_path);
            json user;
            try {
                user = json::parse(is);
            } catch (const json::exception& e) {
                throw ConfigError(config_path + ": " + e.what());
            }
            // the echo's record of how it was produced is not configuration
            if (user.is_object()) user.erase("run");
            merge_known(s.cfg, user, "");
        }
        std::vector<std::string> env;
        for (char** e = environ; e && *e; ++e) env.emplace_back(*e);
        apply_env_overrides(s.cfg, env);
        if (seed >= 0) s.cfg["rng_seed"] = seed;
        if (threads > 0) s.cfg["threads"] = threads;
        if (!out_dir.empty()) s.cfg["output_dir"] = out_dir;

        s.out_dir = text(s.cfg, "output_dir");
        s.map.threads = std::max(1, integer(s.cfg, "threads"));
        const json& seed_node = at_path(s.cfg, "rng_seed");
        if (!seed_node.is_number_integer() || seed_node.get<long long>() < 0) {
            throw ConfigError("rng_seed: expected a non-negative integer");
        }
        const auto rng_seed = seed_node.get<std::uint64_t>();
        fs::create_directories(s.out_dir);

        json echo = s.cfg;
        echo["run"]["command"] = app.get_subcommands().front()->get_name();
        if (!data_path.empty()) echo["run"]["data"] = data_path;
        io::write_json(s.out_dir / "config.resolved.json", echo);

        if (*spectral) return cmd_spectral(s, check_omega5, out);
        if (*simulate) return cmd_simulate(s, out);
        if (*synth) return cmd_synth(s, rng_seed, out);
        return cmd_fit(s, data_path, rng_seed, phenom, micro, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DetuningOutOfRange& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DataFormatError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const TooFewPoints& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const NormalizationInfeasible& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const ForwardModelFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        for (const auto& f : e.failures()) {
            err << "  offset " << f.offset << " meV, f " << f.frequency << " Hz: " << f.message << '\n';
        }
        return kNotConverged;
    } catch (const NotConverged& e) {
        err << "not converged: " << e.what() << " (iterations " << e.iterations() << ", gradient norm "
            << e.gradient_norm() << ")\n";
        return kNotConverged;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNotConverged;
    } catch (const json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const fs::filesystem_error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
}

}  // namespace qrelax::cli
