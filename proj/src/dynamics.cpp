#include "qrelax/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "qrelax/errors.hpp"
#include "qrelax/units.hpp"

namespace qrelax {

// ---------------------------------------------------------------- schedule

int PulseSchedule::toggles_per_dither() const {
    if (!(dither_freq > 0.0) || !std::isfinite(dither_freq)) {
        throw ConfigError("schedule.dither_freq must be > 0 Hz");
    }
    const double ratio = toggle_freq / dither_freq;
    const double m = std::round(ratio);
    if (!(m >= 1.0) || std::fabs(ratio - m) > 1e-9 * m) {
        std::ostringstream os;
        os << "schedule.toggle_freq (" << toggle_freq << " Hz) must be a positive integer multiple of dither_freq ("
           << dither_freq << " Hz)";
        throw ConfigError(os.str());
    }
    return static_cast<int>(m);
}

void PulseSchedule::validate() const {
    const int m = toggles_per_dither();
    if (!std::isfinite(offset)) throw ConfigError("schedule.offset must be finite");
    if (!(toggle_amplitude >= 0.0) || !std::isfinite(toggle_amplitude)) {
        throw ConfigError("schedule.toggle_amplitude must be >= 0 meV");
    }
    if (!(dither_amplitude >= 0.0) || !std::isfinite(dither_amplitude)) {
        throw ConfigError("schedule.dither_amplitude must be >= 0 meV");
    }
    // ramp must be short against the waiting time 1/2f
    if (!(ramp_time >= 0.0) || !(ramp_time < 0.1 * 1e9 / (2.0 * toggle_freq))) {
        std::ostringstream os;
        os << "schedule.ramp_time (" << ramp_time << " ns) must be below a tenth of the waiting time at "
           << toggle_freq << " Hz";
        throw ConfigError(os.str());
    }
    if (steps_per_period < 64 || steps_per_period % (2 * m) != 0) {
        std::ostringstream os;
        os << "schedule.steps_per_period (" << steps_per_period << ") must be >= 64 and divisible by 2 f/nu = "
           << 2 * m;
        throw ConfigError(os.str());
    }
}

int compatible_steps(int target, int toggles_per_dither) {
    const int unit = 2 * toggles_per_dither;
    const int wanted = std::max(target, 64);
    return unit * ((wanted + unit - 1) / unit);
}

namespace {

// square wave is high on step k (0-based, midpoint (k + 1/2) dt) iff
// frac(m (2k + 1) / 2N) < 1/2
bool toggle_high(std::int64_t m, std::int64_t k, std::int64_t n) { return (m * (2 * k + 1)) % (2 * n) < n; }

double dither_at(const PulseSchedule& s, int k, int n) {
    if (s.dither_amplitude == 0.0) return 0.0;
    return s.dither_amplitude * std::sin(2.0 * kPi * (k + 0.5) / n);
}

}  // namespace

std::vector<WaveformSample> discretize_waveform(const PulseSchedule& schedule) {
    schedule.validate();
    const int n = schedule.steps_per_period;
    const int m = schedule.toggles_per_dither();
    const double dt = schedule.step();
    std::vector<WaveformSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double h = toggle_high(m, k, n) ? 1.0 : -1.0;
        out.push_back({schedule.offset + 0.5 * schedule.toggle_amplitude * h + dither_at(schedule, k, n), dt});
    }
    return out;
}

// ---------------------------------------------------------------- matrices

TransferMatrix TransferMatrix::operator*(const TransferMatrix& r) const {
    const auto& a = *this;
    return {a(0, 0) * r(0, 0) + a(0, 1) * r(1, 0), a(0, 0) * r(0, 1) + a(0, 1) * r(1, 1),
            a(1, 0) * r(0, 0) + a(1, 1) * r(1, 0), a(1, 0) * r(0, 1) + a(1, 1) * r(1, 1)};
}

PopulationPair TransferMatrix::apply(const PopulationPair& p) const {
    return {(*this)(0, 0) * p.rho00 + (*this)(0, 1) * p.rho11, (*this)(1, 0) * p.rho00 + (*this)(1, 1) * p.rho11};
}

namespace {

struct DecayFactors {
    double keep;       // exp(-y)
    double lose;       // 1 - exp(-y)
    double avg_keep;   // (1 - exp(-y)) / y
    double avg_lose;   // 1 - avg_keep
};

DecayFactors decay_factors(double y) {
    DecayFactors f{};
    f.keep = std::exp(-y);
    f.lose = -std::expm1(-y);
    if (y > 1e-6) {
        f.avg_keep = f.lose / y;
        f.avg_lose = 1.0 - f.avg_keep;
    } else {
        f.avg_lose = y * (0.5 - y / 6.0);
        f.avg_keep = 1.0 - f.avg_lose;
    }
    return f;
}

TransferMatrix relax_from(double rho00, double rho11, double keep, double lose) {
    return {rho00 + keep * rho11, lose * rho00, lose * rho11, rho11 + keep * rho00};
}

void check_rate(double rate, double epsilon) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        std::ostringstream os;
        os << "relaxation rate at eps = " << epsilon << " meV is " << rate << " (must be finite and >= 0)";
        throw Error(os.str());
    }
}

}  // namespace

TransferMatrix relax_matrix(double epsilon, double dt, double rate, const QubitParams& qubit, bool as_average) {
    if (!(dt > 0.0)) throw ConfigError("relax_matrix: dt must be > 0");
    check_rate(rate, epsilon);
    const double rho00 = equilibrium_ground_population(epsilon, qubit.delta, qubit.temperature);
    const double rho11 = 1.0 - rho00;
    const DecayFactors f = decay_factors(dt * rate);
    return as_average ? relax_from(rho00, rho11, f.avg_keep, f.avg_lose) : relax_from(rho00, rho11, f.keep, f.lose);
}

TransferMatrix relax_matrix(double epsilon, double dt, const RateFunction& rate, const QubitParams& qubit,
                            bool as_average) {
    return relax_matrix(epsilon, dt, rate(epsilon), qubit, as_average);
}

TransferMatrix basis_change_matrix(double epsilon_from, double epsilon_to, const QubitParams& qubit) {
    const OverlapPair mu = ground_overlap_pair(epsilon_from, energy_gap(epsilon_from, qubit.delta), epsilon_to,
                                               energy_gap(epsilon_to, qubit.delta), qubit.delta);
    return {mu.same, mu.flipped, mu.flipped, mu.same};
}

TransferMatrix period_map(const PulseSchedule& schedule, const RateFunction& rate, const QubitParams& qubit) {
    const auto wave = discretize_waveform(schedule);
    TransferMatrix acc = TransferMatrix::identity();
    const std::size_t n = wave.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& s = wave[k];
        const auto& next = wave[(k + 1) % n];
        acc = basis_change_matrix(s.epsilon, next.epsilon, qubit) * relax_matrix(s.epsilon, s.dt, rate, qubit, false) *
              acc;
    }
    return acc;
}

PopulationPair fixed_point(const TransferMatrix& map) {
    // [[1 - b, a], [b, 1 - a]] has stationary vector (a, b) / (a + b)
    const double a = map(0, 1);
    const double b = map(1, 0);
    if (a + b < 1e-14) {
        throw DegenerateMap("transfer map is the identity to 1e-14; fixed point is not unique");
    }
    return {a / (a + b), b / (a + b)};
}

// ---------------------------------------------------------------- engine

namespace {

// Per-step quantities of one square-wave branch (high or low) across a
// dither period.
struct Branch {
    std::vector<double> eps, gap, x, rho_eq, keep, lose, avg_keep;
};

struct OrbitTable {
    int steps = 0;
    double delta = 0.0;
    Branch high, low;
};

void fill_branch(Branch& b, const PulseSchedule& s, double level, int n, const RateFunction& rate,
                 const QubitParams& qubit) {
    const auto size = static_cast<std::size_t>(n);
    for (auto* v : {&b.eps, &b.gap, &b.x, &b.rho_eq, &b.keep, &b.lose, &b.avg_keep}) v->resize(size);
    const double dt = s.period() / n;
    const double beta = qubit.beta();
    const bool flat = s.dither_amplitude == 0.0;
    for (int k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (flat && k > 0) {
            b.eps[i] = b.eps[0];
            b.gap[i] = b.gap[0];
            b.x[i] = b.x[0];
            b.rho_eq[i] = b.rho_eq[0];
            b.keep[i] = b.keep[0];
            b.lose[i] = b.lose[0];
            b.avg_keep[i] = b.avg_keep[0];
            continue;
        }
        const double eps = s.offset + level + dither_at(s, k, n);
        const double gap = energy_gap(eps, qubit.delta);
        const double g = rate(eps);
        check_rate(g, eps);
        const DecayFactors f = decay_factors(dt * g);
        b.eps[i] = eps;
        b.gap[i] = gap;
        b.x[i] = eps / gap;
        b.rho_eq[i] = 1.0 / (1.0 + std::exp(-gap * beta));
        b.keep[i] = f.keep;
        b.lose[i] = f.lose;
        b.avg_keep[i] = f.avg_keep;
    }
}

OrbitTable build_table(const PulseSchedule& s, int n, const RateFunction& rate, const QubitParams& qubit) {
    OrbitTable t;
    t.steps = n;
    t.delta = qubit.delta;
    fill_branch(t.high, s, 0.5 * s.toggle_amplitude, n, rate, qubit);
    if (s.toggle_amplitude == 0.0) {
        t.low = t.high;
    } else {
        fill_branch(t.low, s, -0.5 * s.toggle_amplitude, n, rate, qubit);
    }
    return t;
}

// Mean left occupancy for toggles-per-dither m on a prepared table.
// Column-stochastic maps act on p = rho00 as p -> c + (1 - d) p; tracking d
// instead of the slope keeps the fixed point c / d accurate when relaxation
// per period is tiny.
double orbit_mean(const OrbitTable& t, int m, int start) {
    const std::int64_t n = t.steps;
    const double delta = t.delta;
    auto branch_of = [&](std::int64_t k) -> const Branch& { return toggle_high(m, k, n) ? t.high : t.low; };

    double c = 0.0;
    double d = 0.0;
    std::int64_t k = ((start % n) + n) % n;
    for (std::int64_t j = 0; j < n; ++j) {
        const Branch& b = branch_of(k);
        const auto i = static_cast<std::size_t>(k);
        c = b.rho_eq[i] * b.lose[i] + b.keep[i] * c;
        d = b.lose[i] + b.keep[i] * d;
        const std::int64_t kn = (k + 1 == n) ? 0 : k + 1;
        const Branch& bn = branch_of(kn);
        const auto in = static_cast<std::size_t>(kn);
        const OverlapPair mu = ground_overlap_pair(b.eps[i], b.gap[i], bn.eps[in], bn.gap[in], delta);
        const double slope = mu.same - mu.flipped;
        c = mu.flipped + slope * c;
        d = 2.0 * mu.flipped + slope * d;
        k = kn;
    }

    double p;
    if (d < 1e-14) {
        // identity map: no relaxation and no basis change; start thermal
        p = branch_of(k).rho_eq[static_cast<std::size_t>(k)];
    } else {
        p = c / d;
    }

    double sum = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
        const Branch& b = branch_of(k);
        const auto i = static_cast<std::size_t>(k);
        const double pbar = b.rho_eq[i] + b.avg_keep[i] * (p - b.rho_eq[i]);
        sum += 0.5 * (1.0 - b.x[i]) + b.x[i] * pbar;
        p = b.rho_eq[i] + b.keep[i] * (p - b.rho_eq[i]);
        const std::int64_t kn = (k + 1 == n) ? 0 : k + 1;
        const Branch& bn = branch_of(kn);
        const auto in = static_cast<std::size_t>(kn);
        const OverlapPair mu = ground_overlap_pair(b.eps[i], b.gap[i], bn.eps[in], bn.gap[in], delta);
        p = mu.flipped + (mu.same - mu.flipped) * p;
        k = kn;
    }
    return sum / static_cast<double>(n);
}

}  // namespace

double mean_left_occupancy(const PulseSchedule& schedule, const RateFunction& rate, const QubitParams& qubit,
                           int start_index) {
    schedule.validate();
    const OrbitTable t = build_table(schedule, schedule.steps_per_period, rate, qubit);
    return orbit_mean(t, schedule.toggles_per_dither(), start_index);
}

// ---------------------------------------------------------------- maps

OccupancyMap::OccupancyMap(std::vector<double> offsets_, std::vector<double> freqs_)
    : offsets(std::move(offsets_)), freqs(std::move(freqs_)), values(offsets.size() * freqs.size(), 0.0) {}

void OccupancyMap::validate(bool check_range) const {
    auto increasing = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (!(v[i] > v[i - 1])) return false;
        }
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (offsets.empty() || freqs.empty()) throw DataFormatError("occupancy map: empty grid");
    if (!increasing(offsets)) throw DataFormatError("occupancy map: offsets must be strictly increasing");
    if (!increasing(freqs)) throw DataFormatError("occupancy map: frequencies must be strictly increasing");
    if (values.size() != offsets.size() * freqs.size()) {
        throw DataFormatError("occupancy map: value count does not match grid");
    }
    if (!sigma.empty() && sigma.size() != values.size()) {
        throw DataFormatError("occupancy map: sigma count does not match grid");
    }
    if (check_range) {
        for (double v : values) {
            if (!(v >= 0.0 && v <= 1.0)) throw DataFormatError("occupancy map: values must lie in [0, 1]");
        }
    }
}

namespace {

std::int64_t lcm_capped(std::int64_t a, std::int64_t b, std::int64_t cap) {
    const std::int64_t l = a / std::gcd(a, b) * b;
    return l > cap ? cap + 1 : l;
}

PulseSchedule point_schedule(const PulseSchedule& tmpl, double offset, double freq, int steps) {
    PulseSchedule s = tmpl;
    s.offset = offset;
    s.toggle_freq = freq;
    s.steps_per_period = steps;
    return s;
}

}  // namespace

int map_steps_for(const PulseSchedule& tmpl, std::span<const double> freqs, double freq, const MapOptions& options) {
    const int target = std::max(tmpl.steps_per_period, 64);
    const std::int64_t cap = static_cast<std::int64_t>(options.max_common_steps_factor) * target;
    std::int64_t unit = 1;
    for (double f : freqs) {
        const int m = point_schedule(tmpl, 0.0, f, target).toggles_per_dither();
        unit = lcm_capped(unit, 2 * m, cap);
    }
    const int m = point_schedule(tmpl, 0.0, freq, target).toggles_per_dither();
    if (unit <= cap) {
        const std::int64_t common = unit * ((target + unit - 1) / unit);
        if (common <= cap) return static_cast<int>(common);
    }
    return compatible_steps(target, m);
}

OccupancyMap occupancy_map_masked(std::span<const double> offsets, std::span<const double> freqs,
                                  const RateFunction& rate, const QubitParams& qubit, const PulseSchedule& tmpl,
                                  const OccupancyMap& base, const std::vector<char>& mask, const MapOptions& options) {
    OccupancyMap out(std::vector<double>(offsets.begin(), offsets.end()),
                     std::vector<double>(freqs.begin(), freqs.end()));
    out.validate(false);
    const bool use_base = !mask.empty();
    if (use_base && (mask.size() != offsets.size() || base.values.size() != out.values.size())) {
        throw ConfigError("occupancy map: mask / base do not match the grid");
    }

    // group frequencies by step count so each (offset, N) table is built once
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t fi = 0; fi < freqs.size(); ++fi) {
        const int n = map_steps_for(tmpl, freqs, freqs[fi], options);
        point_schedule(tmpl, offsets.front(), freqs[fi], n).validate();
        groups[n].push_back(fi);
    }

    std::vector<GridPointFailure> failures;
    std::mutex failure_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (std::size_t oi = next++; oi < offsets.size(); oi = next++) {
            if (use_base && !mask[oi]) {
                for (std::size_t fi = 0; fi < freqs.size(); ++fi) {
                    out.values[out.index(fi, oi)] = base.values[base.index(fi, oi)];
                }
                continue;
            }
            for (const auto& [n, members] : groups) {
                try {
                    const PulseSchedule s = point_schedule(tmpl, offsets[oi], freqs[members.front()], n);
                    const OrbitTable table = build_table(s, n, rate, qubit);
                    for (std::size_t fi : members) {
                        const int m = point_schedule(tmpl, offsets[oi], freqs[fi], n).toggles_per_dither();
                        out.values[out.index(fi, oi)] = orbit_mean(table, m, 0);
                    }
                } catch (const std::exception& e) {
                    std::lock_guard lock(failure_mutex);
                    for (std::size_t fi : members) {
                        failures.push_back({offsets[oi], freqs[fi], e.what()});
                        out.values[out.index(fi, oi)] = std::nan("");
                    }
                }
            }
        }
    };

    const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(offsets.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    if (!failures.empty()) {
        std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) {
            return a.offset < b.offset || (a.offset == b.offset && a.frequency < b.frequency);
        });
        throw ForwardModelFailure(std::move(failures));
    }
    return out;
}

OccupancyMap occupancy_map(std::span<const double> offsets, std::span<const double> freqs, const RateFunction& rate,
                           const QubitParams& qubit, const PulseSchedule& tmpl, const MapOptions& options) {
    return occupancy_map_masked(offsets, freqs, rate, qubit, tmpl, OccupancyMap{}, {}, options);
}

OccupancyMap differential_map(const OccupancyMap& map) {
    const std::size_t n = map.offsets.size();
    if (n < 3) throw TooFewPoints("differential_map needs at least 3 offset points");
    OccupancyMap out(map.offsets, map.freqs);
    const auto& x = map.offsets;
    for (std::size_t fi = 0; fi < map.freqs.size(); ++fi) {
        out.at(fi, 0) = (map.at(fi, 1) - map.at(fi, 0)) / (x[1] - x[0]);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            out.at(fi, i) = (map.at(fi, i + 1) - map.at(fi, i - 1)) / (x[i + 1] - x[i - 1]);
        }
        out.at(fi, n - 1) = (map.at(fi, n - 1) - map.at(fi, n - 2)) / (x[n - 1] - x[n - 2]);
    }
    return out;
}

}  // namespace qrelax
