#include "qrelax/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "qrelax/errors.hpp"

namespace qrelax::io {

using nlohmann::json;

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataFormatError("cannot open " + path.string());
    return is;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

double parse_number(const std::string& field, const std::string& where) {
    if (field == "inf") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != field.size()) throw DataFormatError(where + ": not a number: '" + field + "'");
    return v;
}

}  // namespace

void write_map_csv(std::ostream& os, const OccupancyMap& map, const std::string& value_column) {
    os << "offset_meV,freq_Hz," << value_column << ",sigma\n";
    for (std::size_t fi = 0; fi < map.freqs.size(); ++fi) {
        for (std::size_t oi = 0; oi < map.offsets.size(); ++oi) {
            const std::size_t k = map.index(fi, oi);
            os << format_number(map.offsets[oi]) << ',' << format_number(map.freqs[fi]) << ','
               << format_number(map.values[k]) << ',' << (map.sigma.empty() ? "0" : format_number(map.sigma[k]))
               << '\n';
        }
    }
}

void write_map_csv(const std::filesystem::path& path, const OccupancyMap& map, const std::string& value_column) {
    auto os = open_out(path);
    write_map_csv(os, map, value_column);
}

OccupancyMap read_map_csv(std::istream& is, const std::string& source, bool derivative, double lever_arm) {
    std::string line;
    if (!std::getline(is, line)) throw DataFormatError(source + ": empty file");
    const auto header = split_csv(line);
    if (header.size() < 3) throw DataFormatError(source + ":1: expected at least 3 columns");
    double offset_scale = 1.0;
    if (header[0] == "offset_V") {
        if (!(lever_arm > 0.0)) throw ConfigError("lever_arm must be > 0 eV/V");
        offset_scale = lever_arm * 1e3;  // V -> meV
    } else if (header[0] != "offset_meV") {
        throw DataFormatError(source + ":1: first column must be offset_meV or offset_V");
    }
    if (header[1] != "freq_Hz") throw DataFormatError(source + ":1: second column must be freq_Hz");
    const bool has_sigma = header.size() >= 4;
    const double value_scale = derivative ? 1.0 / offset_scale : 1.0;

    struct Row {
        double value;
        double sigma;
        int line;
    };
    std::map<std::pair<double, double>, Row> rows;  // (freq, offset)
    std::vector<double> offsets, freqs;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        const std::string where = source + ":" + std::to_string(lineno);
        if (f.size() != header.size()) throw DataFormatError(where + ": wrong number of columns");
        const double off = parse_number(f[0], where) * offset_scale;
        const double fr = parse_number(f[1], where);
        const double val = parse_number(f[2], where) * value_scale;
        const double sig = has_sigma ? parse_number(f[3], where) * std::fabs(value_scale) : 0.0;
        if (!rows.emplace(std::make_pair(fr, off), Row{val, sig, lineno}).second) {
            throw DataFormatError(where + ": duplicate grid point");
        }
        offsets.push_back(off);
        freqs.push_back(fr);
    }
    if (rows.empty()) throw DataFormatError(source + ": no data rows");
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    std::sort(freqs.begin(), freqs.end());
    freqs.erase(std::unique(freqs.begin(), freqs.end()), freqs.end());
    if (rows.size() != offsets.size() * freqs.size()) {
        // report the first row of the first trace that misses an offset
        std::map<double, std::pair<std::size_t, int>> per_freq;  // freq -> (count, first line)
        for (const auto& [key, row] : rows) {
            auto& [count, first] = per_freq.try_emplace(key.first, 0, row.line).first->second;
            ++count;
            first = std::min(first, row.line);
        }
        for (const auto& [freq, info] : per_freq) {
            if (info.first == offsets.size()) continue;
            std::ostringstream os;
            os << source << ":" << info.second << ": trace at " << freq << " Hz has " << info.first
               << " offsets, other traces cover " << offsets.size();
            throw GridMismatch(os.str());
        }
    }
    OccupancyMap map(offsets, freqs);
    bool any_sigma = false;
    std::vector<double> sigma(map.values.size(), 0.0);
    for (const auto& [key, row] : rows) {
        const auto fi = static_cast<std::size_t>(std::lower_bound(freqs.begin(), freqs.end(), key.first) - freqs.begin());
        const auto oi =
            static_cast<std::size_t>(std::lower_bound(offsets.begin(), offsets.end(), key.second) - offsets.begin());
        map.values[map.index(fi, oi)] = row.value;
        sigma[map.index(fi, oi)] = row.sigma;
        any_sigma = any_sigma || row.sigma != 0.0;
    }
    if (any_sigma) {
        for (const auto& [key, row] : rows) {
            if (!(row.sigma > 0.0)) {
                throw DataFormatError(source + ":" + std::to_string(row.line) +
                                      ": sigma must be > 0 when any sigma is given");
            }
        }
        map.sigma = std::move(sigma);
    }
    try {
        map.validate(!derivative);
    } catch (const DataFormatError& e) {
        throw DataFormatError(source + ": " + e.what());
    }
    return map;
}

OccupancyMap read_map_csv(const std::filesystem::path& path, bool derivative, double lever_arm) {
    auto is = open_in(path);
    return read_map_csv(is, path.string(), derivative, lever_arm);
}

namespace {

std::string bound_text(double v, bool open, bool upper) {
    if (open) return upper ? "inf" : "0";
    return format_number(v);
}

}  // namespace

void write_rate_csv(std::ostream& os, const FitResult& fit, double delta) {
    os << "epsilon_meV,gap_meV,rate_Hz,lo68,hi68,lo95,hi95\n";
    const auto& knots = fit.best_fit.knots();
    for (std::size_t j = 0; j < knots.size(); ++j) {
        const double e = knots[j];
        os << format_number(e) << ',' << format_number(std::hypot(e, delta)) << ','
           << format_number(rate_per_ns_to_hz(fit.best_fit(e)));
        for (const auto* bands : {&fit.confidence_68, &fit.confidence_95}) {
            if (bands->size() == knots.size()) {
                const RateBound& b = (*bands)[j];
                os << ',' << bound_text(rate_per_ns_to_hz(b.lower), b.lower_open, false) << ','
                   << bound_text(rate_per_ns_to_hz(b.upper), b.upper_open, true);
            } else {
                os << ",,";
            }
        }
        os << '\n';
    }
}

void write_rate_csv(const std::filesystem::path& path, const FitResult& fit, double delta) {
    auto os = open_out(path);
    write_rate_csv(os, fit, delta);
}

json to_json(const FitResult& fit, double delta) {
    json j;
    j["knots_meV"] = fit.best_fit.knots();
    j["gaps_meV"] = fit.best_fit.knot_gaps(delta);
    j["log_values"] = fit.best_fit.log_values();
    std::vector<double> hz;
    for (double e : fit.best_fit.knots()) hz.push_back(rate_per_ns_to_hz(fit.best_fit(e)));
    j["rates_Hz"] = hz;
    auto bands = [](const std::vector<RateBound>& b) {
        json arr = json::array();
        for (const auto& x : b) {
            json o;
            o["lower_Hz"] = x.lower_open ? json(nullptr) : json(rate_per_ns_to_hz(x.lower));
            o["upper_Hz"] = x.upper_open ? json(nullptr) : json(rate_per_ns_to_hz(x.upper));
            o["lower_open"] = x.lower_open;
            o["upper_open"] = x.upper_open;
            arr.push_back(o);
        }
        return arr;
    };
    j["confidence_68"] = bands(fit.confidence_68);
    j["confidence_95"] = bands(fit.confidence_95);
    j["misfit_min"] = fit.misfit_min;
    j["delta_misfit"] = fit.delta_misfit;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["gradient_norm"] = fit.gradient_norm;
    j["misfit_history"] = fit.misfit_history;
    return j;
}

json to_json(const PulseSchedule& s) {
    return {{"toggle_amplitude_meV", s.toggle_amplitude},
            {"dither_amplitude_meV", s.dither_amplitude},
            {"dither_freq_Hz", s.dither_freq},
            {"ramp_time_ns", s.ramp_time},
            {"steps_per_period", s.steps_per_period}};
}

PulseSchedule schedule_from_json(const json& j) {
    PulseSchedule s;
    try {
        s.toggle_amplitude = j.at("toggle_amplitude_meV").get<double>();
        s.dither_amplitude = j.value("dither_amplitude_meV", 0.0);
        s.dither_freq = j.value("dither_freq_Hz", 43.0);
        s.ramp_time = j.value("ramp_time_ns", 16.0);
        s.steps_per_period = j.value("steps_per_period", 4096);
    } catch (const json::exception& e) {
        throw DataFormatError(std::string("schedule: ") + e.what());
    }
    s.toggle_freq = s.dither_freq;
    return s;
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto os = open_out(path);
    os << std::setw(2) << j << '\n';
}

json read_json(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw DataFormatError(path.string() + ": " + e.what());
    }
}

void write_dataset(const std::filesystem::path& dir, const MeasuredSet& data, const json& metadata) {
    json manifest;
    manifest["format"] = "qrelax-dataset-1";
    manifest["lever_arm_eV_per_V"] = data.lever_arm;
    manifest["lever_arm_relative_uncertainty"] = data.lever_arm_relative_uncertainty;
    manifest["metadata"] = metadata;
    manifest["experiments"] = json::array();
    for (std::size_t i = 0; i < data.experiments.size(); ++i) {
        const std::string name = "trace_" + std::to_string(i) + ".csv";
        write_map_csv(dir / name, data.experiments[i].differential, "dn_doffset");
        json e = to_json(data.experiments[i].schedule);
        e["trace_file"] = name;
        manifest["experiments"].push_back(e);
    }
    write_json(dir / "dataset.json", manifest);
}

MeasuredSet read_dataset(const std::filesystem::path& manifest_path) {
    const json manifest = read_json(manifest_path);
    MeasuredSet out;
    try {
        out.lever_arm = manifest.value("lever_arm_eV_per_V", 0.021);
        out.lever_arm_relative_uncertainty = manifest.value("lever_arm_relative_uncertainty", 0.1);
        const auto& exps = manifest.at("experiments");
        if (!exps.is_array() || exps.empty()) throw DataFormatError("no experiments listed");
        for (const auto& e : exps) {
            MeasuredExperiment me;
            me.schedule = schedule_from_json(e);
            const auto file = manifest_path.parent_path() / e.at("trace_file").get<std::string>();
            me.differential = read_map_csv(file, true, out.lever_arm);
            out.experiments.push_back(std::move(me));
        }
    } catch (const json::exception& e) {
        throw DataFormatError(manifest_path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace qrelax::io
