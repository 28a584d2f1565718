#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qrelax/cli.hpp"
#include "qrelax/errors.hpp"
#include "qrelax/io.hpp"
#include "support.hpp"

using namespace qrelax;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qrelax_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    args.insert(args.begin(), "qrelax");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int rc = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return rc;
}

// A small grid that runs in well under a second.
fs::path small_config(const fs::path& dir) {
    nlohmann::json cfg;
    cfg["schedule"]["toggle_amplitudes_meV"] = {0.21};
    cfg["schedule"]["dither_amplitude_meV"] = 0.0;
    cfg["schedule"]["freqs_Hz"] = {215.0, 860.0, 3440.0};
    cfg["schedule"]["steps_per_period"] = 160;
    cfg["schedule"]["offset_min_meV"] = -0.4;
    cfg["schedule"]["offset_max_meV"] = 0.4;
    cfg["schedule"]["offset_count"] = 17;
    cfg["spectral_grid"]["count"] = 11;
    cfg["spectral"]["coupling_alpha"] = 0.005;
    cfg["fit"]["knots"] = 5;
    cfg["fit"]["realizations"] = 4;
    cfg["fit"]["max_iterations"] = 30;
    const fs::path p = dir / "small.json";
    io::write_json(p, cfg);
    return p;
}

}  // namespace

TEST_SUITE("io") {
    TEST_CASE("map csv round trip is bit exact") {
        std::mt19937_64 rng(51);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        OccupancyMap m({-0.3, -0.1 / 3.0, 0.2, 1.0 / 7.0 + 0.3}, {215.0, 430.0, 12900.0});
        for (double& v : m.values) v = u(rng);
        m.sigma.assign(m.values.size(), 0.0);
        for (double& v : m.sigma) v = 1e-3 + u(rng) * 1e-2;
        std::stringstream ss;
        io::write_map_csv(ss, m, "n_left");
        const OccupancyMap back = io::read_map_csv(ss, "mem", false);
        CHECK(back.offsets == m.offsets);
        CHECK(back.freqs == m.freqs);
        CHECK(back.values == m.values);
        CHECK(back.sigma == m.sigma);
        CHECK(io::format_number(0.1) == "0.10000000000000001");
        CHECK(io::format_number(std::numeric_limits<double>::infinity()) == "inf");
    }

    TEST_CASE("row order does not matter") {
        std::mt19937_64 rng(52);
        OccupancyMap m({-0.2, 0.0, 0.2}, {215.0, 430.0});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& v : m.values) v = u(rng);
        std::stringstream ss;
        io::write_map_csv(ss, m, "n_left");
        std::string header;
        std::getline(ss, header);
        std::vector<std::string> lines;
        for (std::string l; std::getline(ss, l);) lines.push_back(l);
        std::shuffle(lines.begin(), lines.end(), rng);
        std::stringstream shuffled;
        shuffled << header << '\n';
        for (const auto& l : lines) shuffled << l << '\n';
        const OccupancyMap back = io::read_map_csv(shuffled, "mem", false);
        CHECK(back.values == m.values);
    }

    TEST_CASE("grid mismatch names the file and line") {
        std::stringstream ss;
        ss << "offset_meV,freq_Hz,dn_doffset,sigma\n"
           << "-0.1,215,1,0.1\n0,215,2,0.1\n0.1,215,1,0.1\n"
           << "-0.1,430,1,0.1\n0.1,430,1,0.1\n";
        try {
            io::read_map_csv(ss, "traces.csv", true);
            FAIL("expected GridMismatch");
        } catch (const GridMismatch& e) {
            CHECK(std::string(e.what()).find("traces.csv:5") != std::string::npos);
        }
    }

    TEST_CASE("malformed rows") {
        std::stringstream bad_number("offset_meV,freq_Hz,n_left\n0.1,215,abc\n");
        try {
            io::read_map_csv(bad_number, "a.csv", false);
            FAIL("expected DataFormatError");
        } catch (const DataFormatError& e) {
            CHECK(std::string(e.what()).find("a.csv:2") != std::string::npos);
        }
        std::stringstream bad_header("eps,freq_Hz,n_left\n0.1,215,0.5\n");
        CHECK_THROWS_AS(io::read_map_csv(bad_header, "b.csv", false), DataFormatError);
        std::stringstream dup("offset_meV,freq_Hz,n_left\n0.1,215,0.5\n0.1,215,0.5\n");
        CHECK_THROWS_AS(io::read_map_csv(dup, "c.csv", false), DataFormatError);
        std::stringstream range("offset_meV,freq_Hz,n_left\n0.1,215,1.5\n0.2,215,0.5\n");
        CHECK_THROWS_AS(io::read_map_csv(range, "d.csv", false), DataFormatError);
    }

    TEST_CASE("voltage offsets use the lever arm once") {
        std::stringstream ss("offset_V,freq_Hz,dn_doffset,sigma\n-0.01,215,2.1,0.21\n0,215,4.2,0.21\n0.01,215,2.1,0.21\n");
        const OccupancyMap m = io::read_map_csv(ss, "v.csv", true, 0.021);
        CHECK(m.offsets[0] == rel(-0.21, 1e-14));
        CHECK(m.offsets[2] == rel(0.21, 1e-14));
        // per volt -> per meV
        CHECK(m.values[1] == rel(4.2 / 21.0, 1e-14));
        CHECK(m.sigma[1] == rel(0.21 / 21.0, 1e-14));
    }

    TEST_CASE("dataset round trip") {
        const fs::path dir = scratch_dir("dataset");
        MeasuredSet data;
        PulseSchedule s;
        s.toggle_amplitude = 0.53;
        s.dither_amplitude = 0.06;
        s.steps_per_period = 4800;
        OccupancyMap d({-0.1, 0.0, 0.1}, {215.0, 430.0, 860.0});
        for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = 0.1 * static_cast<double>(i);
        d.sigma.assign(d.values.size(), 0.01);
        data.experiments.push_back({s, d});
        io::write_dataset(dir, data, {{"note", "test"}});
        const MeasuredSet back = io::read_dataset(dir / "dataset.json");
        REQUIRE(back.experiments.size() == 1);
        CHECK(back.experiments[0].differential.values == d.values);
        CHECK(back.experiments[0].schedule.toggle_amplitude == 0.53);
        CHECK(back.experiments[0].schedule.steps_per_period == 4800);
        CHECK(back.lever_arm == 0.021);
        CHECK_THROWS_AS(io::read_dataset(dir / "missing.json"), DataFormatError);
    }

    TEST_CASE("fit result json") {
        FitResult fit;
        fit.best_fit = RateCurve::constant({0.0, 0.1, 0.2}, 1e-5);
        fit.confidence_68 = {{1e-6, 1e-4, false, false}, {0.0, 1e-3, true, false}, {1e-6, 0.0, false, true}};
        fit.confidence_95 = fit.confidence_68;
        fit.converged = true;
        const auto j = io::to_json(fit, 1e-3);
        CHECK(j.at("knots_meV").size() == 3);
        CHECK(j.at("converged") == true);
        std::stringstream ss;
        io::write_rate_csv(ss, fit, 1e-3);
        std::string header;
        std::getline(ss, header);
        CHECK(header == "epsilon_meV,gap_meV,rate_Hz,lo68,hi68,lo95,hi95");
        std::string row;
        std::getline(ss, row);
        std::getline(ss, row);
        std::getline(ss, row);
        CHECK(row.find("inf") != std::string::npos);
    }
}

TEST_SUITE("cli") {
    TEST_CASE("defaults, presets and environment overrides") {
        auto cfg = cli::default_config();
        CHECK(cfg.at("qubit").at("temperature_K") == 0.3);
        CHECK(cli::preset("paper").at("schedule").at("toggle_amplitudes_meV").size() == 2);
        CHECK_THROWS_AS(cli::preset("nope"), ConfigError);

        cli::apply_env_overrides(cfg, {"QRELAX_QUBIT__TEMPERATURE_K=0.1", "QRELAX_FIT__DELTA_STATISTIC=std",
                                       "QRELAX_SCHEDULE__FREQS_HZ=[43, 86, 129]", "HOME=/root"});
        CHECK(cfg.at("qubit").at("temperature_K") == 0.1);
        CHECK(cfg.at("fit").at("delta_statistic") == "std");
        CHECK(cfg.at("schedule").at("freqs_Hz").size() == 3);
        CHECK_THROWS_AS(cli::apply_env_overrides(cfg, {"QRELAX_QUBIT__NOPE=1"}), ConfigError);
    }

    TEST_CASE("exit codes") {
        const fs::path dir = scratch_dir("exit");
        const fs::path cfg = small_config(dir);
        CHECK(run_cli({}) == cli::kUsage);
        CHECK(run_cli({"bogus"}) == cli::kUsage);
        std::string out;
        CHECK(run_cli({"--config", cfg.string(), "--out", (dir / "spec").string(), "spectral", "--check-omega5"}, &out) ==
              cli::kSuccess);
        CHECK(out.find("PASS") != std::string::npos);
        CHECK(fs::exists(dir / "spec" / "spectral.csv"));
        CHECK(fs::exists(dir / "spec" / "config.resolved.json"));

        nlohmann::json empty = io::read_json(cfg);
        empty["spectral_grid"]["count"] = 0;
        io::write_json(dir / "empty.json", empty);
        CHECK(run_cli({"--config", (dir / "empty.json").string(), "--out", (dir / "e").string(), "spectral"}) ==
              cli::kConfigError);

        nlohmann::json unknown = io::read_json(cfg);
        unknown["qubit"]["colour"] = "blue";
        io::write_json(dir / "unknown.json", unknown);
        std::string err;
        CHECK(run_cli({"--config", (dir / "unknown.json").string(), "--out", (dir / "u").string(), "simulate"},
                      nullptr, &err) == cli::kConfigError);
        CHECK(err.find("qubit.colour") != std::string::npos);

        std::ofstream(dir / "broken.json") << "{ not json";
        CHECK(run_cli({"--config", (dir / "broken.json").string(), "simulate"}) == cli::kConfigError);

        std::ofstream(dir / "bad_manifest.json") << R"({"experiments": []})";
        CHECK(run_cli({"--config", cfg.string(), "--out", (dir / "f").string(), "fit", "--data",
                       (dir / "bad_manifest.json").string()}) == cli::kDataError);
    }

    TEST_CASE("simulate and synth agree and are deterministic") {
        const fs::path dir = scratch_dir("synth");
        const fs::path cfg = small_config(dir);
        REQUIRE(run_cli({"--config", cfg.string(), "--out", (dir / "sim").string(), "simulate"}) == cli::kSuccess);
        REQUIRE(run_cli({"--config", cfg.string(), "--out", (dir / "a").string(), "--seed", "9", "synth"}) ==
                cli::kSuccess);
        REQUIRE(run_cli({"--config", cfg.string(), "--out", (dir / "b").string(), "--seed", "9", "synth"}) ==
                cli::kSuccess);
        CHECK(slurp(dir / "a" / "trace_0.csv") == slurp(dir / "b" / "trace_0.csv"));
        CHECK(slurp(dir / "a" / "dataset.json") == slurp(dir / "b" / "dataset.json"));

        // zero noise reproduces the simulated differential
        nlohmann::json quiet = io::read_json(cfg);
        quiet["synth"]["noise_level"] = 0.0;
        io::write_json(dir / "quiet.json", quiet);
        REQUIRE(run_cli({"--config", (dir / "quiet.json").string(), "--out", (dir / "q").string(), "synth"}) ==
                cli::kSuccess);
        const OccupancyMap sim = io::read_map_csv(dir / "sim" / "differential_0.csv", true);
        const OccupancyMap syn = io::read_map_csv(dir / "q" / "trace_0.csv", true);
        CHECK(sim.values == syn.values);

        // the resolved config re-runs to identical output
        REQUIRE(run_cli({"--config", (dir / "sim" / "config.resolved.json").string(), "--out",
                         (dir / "sim2").string(), "simulate"}) == cli::kSuccess);
        CHECK(slurp(dir / "sim" / "occupancy_0.csv") == slurp(dir / "sim2" / "occupancy_0.csv"));
    }

    TEST_CASE("fit runs end to end on a synthetic dataset") {
        const fs::path dir = scratch_dir("fit");
        const fs::path cfg = small_config(dir);
        REQUIRE(run_cli({"--config", cfg.string(), "--out", (dir / "data").string(), "--seed", "3", "synth"}) ==
                cli::kSuccess);
        const int rc = run_cli({"--config", cfg.string(), "--out", (dir / "fit").string(), "fit", "--data",
                                (dir / "data" / "dataset.json").string()});
        CHECK(rc == cli::kSuccess);
        const auto j = io::read_json(dir / "fit" / "fit.json");
        CHECK(j.at("knots_meV").size() == 5);
        CHECK(fs::exists(dir / "fit" / "rates.csv"));

        nlohmann::json short_fit = io::read_json(cfg);
        short_fit["fit"]["max_iterations"] = 1;
        io::write_json(dir / "short.json", short_fit);
        CHECK(run_cli({"--config", (dir / "short.json").string(), "--out", (dir / "fit1").string(), "fit", "--data",
                       (dir / "data" / "dataset.json").string()}) == cli::kNotConverged);
    }
}
