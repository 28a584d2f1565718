#include "qrelax/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "qrelax/errors.hpp"

namespace qrelax {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    // splitmix64 finaliser
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------- misfit

double misfit(const OccupancyMap& a, const OccupancyMap& b) {
    if (a.offsets != b.offsets || a.freqs != b.freqs || a.values.size() != b.values.size()) {
        throw GridMismatch("misfit: occupancy maps are on different grids");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        m += d * d;
    }
    return m;
}

double misfit(std::span<const Experiment> a, std::span<const Experiment> b) {
    if (a.size() != b.size()) throw GridMismatch("misfit: experiment counts differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m += misfit(a[i].occupancy, b[i].occupancy);
    return m;
}

std::vector<OccupancyMap> forward_model(std::span<const Experiment> experiments, const RateFunction& rate,
                                        const QubitParams& qubit, const MapOptions& options) {
    std::vector<OccupancyMap> out;
    out.reserve(experiments.size());
    for (const auto& e : experiments) {
        out.push_back(occupancy_map(e.occupancy.offsets, e.occupancy.freqs, rate, qubit, e.schedule, options));
    }
    return out;
}

double detuning_reach(std::span<const Experiment> data) {
    double reach = 0.0;
    for (const auto& e : data) {
        const double swing = 0.5 * e.schedule.toggle_amplitude + e.schedule.dither_amplitude;
        for (double o : e.occupancy.offsets) reach = std::max(reach, std::fabs(o) + swing);
    }
    return reach;
}

// ---------------------------------------------------------------- evaluator

namespace {

struct AbsRange {
    double lo;
    double hi;
};

// Forward model over a set of experiments, with incremental re-evaluation of
// the offsets whose waveform visits a changed part of the rate curve.
class MapEvaluator {
public:
    MapEvaluator(std::span<const Experiment> data, const QubitParams& qubit, const MapOptions& options)
        : data_(data), qubit_(qubit), options_(options) {
        for (const auto& e : data_) {
            const double swing = 0.5 * e.schedule.toggle_amplitude + e.schedule.dither_amplitude;
            std::vector<AbsRange> r;
            for (double o : e.occupancy.offsets) {
                const double a = o - swing;
                const double b = o + swing;
                if (a <= 0.0 && b >= 0.0) {
                    r.push_back({0.0, std::max(-a, b)});
                } else {
                    r.push_back({std::min(std::fabs(a), std::fabs(b)), std::max(std::fabs(a), std::fabs(b))});
                }
            }
            ranges_.push_back(std::move(r));
            size_ += e.occupancy.values.size();
        }
    }

    std::vector<OccupancyMap> full(const RateCurve& curve) const {
        return forward_model(data_, [&curve](double eps) { return curve(eps); }, qubit_, options_);
    }

    std::vector<OccupancyMap> partial(const RateCurve& curve, const std::vector<OccupancyMap>& base,
                                      RateCurve::Support support) const {
        std::vector<OccupancyMap> out;
        out.reserve(data_.size());
        const RateFunction rate = [&curve](double eps) { return curve(eps); };
        for (std::size_t i = 0; i < data_.size(); ++i) {
            std::vector<char> mask(ranges_[i].size(), 0);
            bool any = false;
            for (std::size_t k = 0; k < mask.size(); ++k) {
                mask[k] = ranges_[i][k].hi >= support.lower && ranges_[i][k].lo <= support.upper;
                any = any || mask[k];
            }
            if (!any) {
                out.push_back(base[i]);
                continue;
            }
            const auto& occ = data_[i].occupancy;
            out.push_back(occupancy_map_masked(occ.offsets, occ.freqs, rate, qubit_, data_[i].schedule, base[i],
                                               mask, options_));
        }
        return out;
    }

    Eigen::VectorXd residual(const std::vector<OccupancyMap>& model) const {
        Eigen::VectorXd r(static_cast<Eigen::Index>(size_));
        Eigen::Index k = 0;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            const auto& d = data_[i].occupancy.values;
            const OccupancyMap seen = apply_processing(data_[i], model[i]);
            for (std::size_t j = 0; j < d.size(); ++j) r[k++] = seen.values[j] - d[j];
        }
        return r;
    }

private:
    std::span<const Experiment> data_;
    QubitParams qubit_;
    MapOptions options_;
    std::vector<std::vector<AbsRange>> ranges_;
    std::size_t size_ = 0;
};

void check_fit_data(std::span<const Experiment> data) {
    if (data.empty()) throw TooFewPoints("fit: no experiments");
    std::set<double> freqs;
    for (const auto& e : data) {
        e.occupancy.validate(false);
        e.schedule.validate();
        freqs.insert(e.occupancy.freqs.begin(), e.occupancy.freqs.end());
    }
    if (freqs.size() < 3) throw TooFewPoints("fit: data must cover at least 3 toggle frequencies");
}

}  // namespace

// ---------------------------------------------------------------- rate fit

FitResult fit_rate_curve(std::span<const Experiment> data, const QubitParams& qubit, std::vector<double> knots,
                         const FitOptions& options, const std::optional<RateCurve>& initial) {
    check_fit_data(data);
    const double reach = detuning_reach(data);
    if (knots.empty()) knots = uniform_knots(reach, 12);
    if (knots.back() < reach * (1.0 - 1e-9)) {
        std::ostringstream os;
        os << "fit: knots end at " << knots.back() << " meV but the waveforms reach |eps| = " << reach << " meV";
        throw ConfigError(os.str());
    }

    const MapEvaluator ev(data, qubit, options.map);
    const RateCurve seed_curve = initial ? RateCurve(knots, initial->log_values())
                                         : RateCurve::constant(knots, options.seed_rate);
    const Eigen::VectorXd x0 =
        Eigen::Map<const Eigen::VectorXd>(seed_curve.log_values().data(), static_cast<Eigen::Index>(knots.size()));

    // most recent full evaluations, reused as the base of Jacobian columns
    std::vector<std::pair<Eigen::VectorXd, std::vector<OccupancyMap>>> cache;
    auto to_curve = [&knots](const Eigen::VectorXd& x) {
        return RateCurve(knots, std::vector<double>(x.data(), x.data() + x.size()));
    };
    const ResidualFn residual = [&](const Eigen::VectorXd& x) {
        auto maps = ev.full(to_curve(x));
        Eigen::VectorXd r = ev.residual(maps);
        cache.emplace_back(x, std::move(maps));
        if (cache.size() > 3) cache.erase(cache.begin());
        return r;
    };
    const JacobianFn jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r, const Eigen::VectorXd& h) {
        const std::vector<OccupancyMap>* base = nullptr;
        for (const auto& [cx, maps] : cache) {
            if (cx == x) base = &maps;
        }
        std::vector<OccupancyMap> fresh;
        if (!base) {
            fresh = ev.full(to_curve(x));
            base = &fresh;
        }
        const RateCurve at_x = to_curve(x);
        Eigen::MatrixXd jac(r.size(), x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            Eigen::VectorXd xp = x;
            xp[j] += h[j];
            const auto maps = ev.partial(to_curve(xp), *base, at_x.knot_support(static_cast<std::size_t>(j)));
            jac.col(j) = (ev.residual(maps) - r) / h[j];
        }
        return jac;
    };

    LeastSquaresOptions solver = options.solver;
    if (!(options.min_rate > 0.0) || !(options.max_rate > options.min_rate)) {
        throw ConfigError("fit: need 0 < min_rate < max_rate");
    }
    solver.lower_bounds = Eigen::VectorXd::Constant(x0.size(), std::log(options.min_rate));
    solver.upper_bounds = Eigen::VectorXd::Constant(x0.size(), std::log(options.max_rate));
    const LeastSquaresResult ls =
        levenberg_marquardt(residual, x0.cwiseMax(solver.lower_bounds).cwiseMin(solver.upper_bounds), solver, jacobian);

    FitResult out;
    out.best_fit = to_curve(ls.x);
    out.misfit_min = ls.cost;
    out.iterations = ls.iterations;
    out.converged = ls.converged;
    out.gradient_norm = ls.gradient_norm;
    out.misfit_history = ls.cost_history;
    out.jacobian = ls.jacobian;
    if (!out.converged && options.throw_on_nonconvergence) {
        throw NotConverged("fit_rate_curve: iteration limit reached", ls.iterations, ls.gradient_norm,
                           std::vector<double>(ls.x.data(), ls.x.data() + ls.x.size()));
    }
    return out;
}

// ---------------------------------------------------------------- delta M

double estimate_delta_misfit(const MeasuredSet& data, const SmoothedSet& smoothed, const SmoothingOptions& smoothing,
                             const DeltaMisfitOptions& options) {
    if (options.realizations < 2) throw ConfigError("delta_misfit: need at least 2 noise realizations");
    if (options.noise_sigma && !(*options.noise_sigma >= 0.0)) throw ConfigError("delta_misfit: sigma must be >= 0");
    if (smoothed.traces.size() != data.experiments.size()) {
        throw GridMismatch("delta_misfit: smoothed set does not match the data");
    }
    if (options.noise_sigma && *options.noise_sigma == 0.0) return 0.0;

    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(options.realizations));
    for (int r = 0; r < options.realizations; ++r) {
        std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> normal(0.0, 1.0);
        double m = 0.0;
        for (std::size_t e = 0; e < data.experiments.size(); ++e) {
            const OccupancyMap& dm = data.experiments[e].differential;
            const std::size_t n = dm.offsets.size();
            for (std::size_t fi = 0; fi < dm.freqs.size(); ++fi) {
                const SmoothedTrace& t = smoothed.traces[e][fi];
                std::vector<double> noisy(n), sig(n);
                for (std::size_t i = 0; i < n; ++i) {
                    if (options.noise_sigma) {
                        sig[i] = *options.noise_sigma * std::fabs(t.scale);
                    } else if (!dm.sigma.empty()) {
                        sig[i] = dm.sigma[dm.index(fi, i)] * std::fabs(t.scale);
                    } else {
                        sig[i] = t.noise_estimate;
                    }
                    noisy[i] = t.differential(dm.offsets[i]) + sig[i] * normal(rng);
                }
                SmoothingOptions opt = smoothing;
                opt.n_modes = std::max(t.modes_used, 2);
                const bool weighted = std::all_of(sig.begin(), sig.end(), [](double s) { return s > 0.0; });
                const SmoothedTrace tr = smooth_to_occupancy(
                    dm.offsets, noisy, weighted ? std::span<const double>(sig) : std::span<const double>{}, opt);
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = tr.occupancy(dm.offsets[i]) - t.occupancy(dm.offsets[i]);
                    m += d * d;
                }
            }
        }
        samples.push_back(m);
    }
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    if (options.statistic == DeltaMisfitStatistic::Mean) return mean;
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    return std::sqrt(var / static_cast<double>(samples.size() - 1));
}

// ---------------------------------------------------------------- confidence

namespace {

struct Sample {
    double t;
    double m;
};

// Distance t >= 0 along one direction where the misfit first crosses target,
// or nullopt if it stays below across (0, limit].
std::optional<double> find_crossing(const std::function<double(double)>& f, std::vector<Sample>& samples,
                                    double target, double guess, double limit, double tol) {
    // bracket from the samples already taken (sorted by t)
    double a = 0.0, fa = samples.front().m;
    std::optional<Sample> b;
    for (const auto& s : samples) {
        if (s.m <= target) {
            a = s.t;
            fa = s.m;
        } else {
            b = s;
            break;
        }
    }
    if (!b) {
        double t = std::max(guess, 2.0 * a);
        t = std::min(std::max(t, tol), limit);
        while (true) {
            const double m = f(t);
            samples.push_back({t, m});
            std::sort(samples.begin(), samples.end(), [](const Sample& x, const Sample& y) { return x.t < y.t; });
            if (m > target) {
                b = Sample{t, m};
                break;
            }
            a = t;
            fa = m;
            if (t >= limit) return std::nullopt;
            t = std::min(limit, t * 3.0);
        }
    }
    // Illinois regula falsi on f - target
    double lo = a, glo = fa - target;
    double hi = b->t, ghi = b->m - target;
    int side = 0;
    while (hi - lo > tol) {
        double t = lo - glo * (hi - lo) / (ghi - glo);
        if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
        // keep the bracket shrinking geometrically
        t = std::clamp(t, lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo));
        const double m = f(t);
        samples.push_back({t, m});
        const double g = m - target;
        if (g <= 0.0) {
            lo = t;
            glo = g;
            if (side == -1) ghi *= 0.5;
            side = -1;
        } else {
            hi = t;
            ghi = g;
            if (side == 1) glo *= 0.5;
            side = 1;
        }
    }
    std::sort(samples.begin(), samples.end(), [](const Sample& x, const Sample& y) { return x.t < y.t; });
    return 0.5 * (lo + hi);
}

}  // namespace

FitResult confidence_regions(FitResult fit, std::span<const Experiment> data, const QubitParams& qubit,
                             double delta_misfit, const ConfidenceOptions& options) {
    if (!(delta_misfit >= 0.0) || !std::isfinite(delta_misfit)) {
        throw ConfigError("confidence: delta_misfit must be finite and >= 0");
    }
    const RateCurve& best = fit.best_fit;
    const std::size_t n = best.size();
    fit.delta_misfit = delta_misfit;
    fit.confidence_68.assign(n, {});
    fit.confidence_95.assign(n, {});
    if (delta_misfit == 0.0) {
        for (std::size_t j = 0; j < n; ++j) {
            const double g = std::exp(best.log_values()[j]);
            fit.confidence_68[j] = fit.confidence_95[j] = {g, g, false, false};
        }
        return fit;
    }

    const MapEvaluator ev(data, qubit, options.map);
    const auto base = ev.full(best);
    const double m_min = ev.residual(base).squaredNorm();
    fit.misfit_min = m_min;
    const double target68 = m_min + options.level_68 * delta_misfit;
    const double target95 = m_min + options.level_95 * delta_misfit;

    for (std::size_t j = 0; j < n; ++j) {
        double curvature = 0.0;  // (J^T J)_jj, half the Gauss-Newton Hessian
        if (fit.jacobian.cols() == static_cast<Eigen::Index>(n)) {
            curvature = fit.jacobian.col(static_cast<Eigen::Index>(j)).squaredNorm();
        }
        const double guess =
            curvature > 0.0 ? std::sqrt(options.level_68 * delta_misfit / curvature) : 0.1 * options.log_range;
        const RateCurve::Support support = best.knot_support(j);
        const double center = best.log_values()[j];

        for (int dir : {-1, 1}) {
            auto f = [&](double t) {
                std::vector<double> logs = best.log_values();
                logs[j] = center + dir * t;
                const RateCurve c = best.with_log_values(std::move(logs));
                return ev.residual(ev.partial(c, base, support)).squaredNorm();
            };
            std::vector<Sample> samples{{0.0, m_min}};
            const auto t68 =
                find_crossing(f, samples, target68, guess, options.log_range, options.log_tolerance);
            std::optional<double> t95;
            if (t68) {
                t95 = find_crossing(f, samples, target95, 2.0 * *t68, options.log_range, options.log_tolerance);
            }
            auto assign = [&](RateBound& b, const std::optional<double>& t) {
                if (dir < 0) {
                    b.lower_open = !t;
                    b.lower = t ? std::exp(center - *t) : 0.0;
                } else {
                    b.upper_open = !t;
                    b.upper = t ? std::exp(center + *t) : std::numeric_limits<double>::infinity();
                }
            };
            assign(fit.confidence_68[j], t68);
            assign(fit.confidence_95[j], t95);
        }
    }
    return fit;
}

// ---------------------------------------------------------------- synthesis

SynthResult synth_data(const RateFunction& true_rate, const QubitParams& qubit, std::span<const Experiment> grid,
                       const NoiseSpec& noise, std::uint64_t seed, const MapOptions& options) {
    if (!(noise.level >= 0.0) || !std::isfinite(noise.level)) {
        throw ConfigError("synth: noise level must be finite and >= 0");
    }
    SynthResult out;
    out.seed = seed;
    const auto maps = forward_model(grid, true_rate, qubit, options);
    for (std::size_t e = 0; e < grid.size(); ++e) {
        out.clean.push_back({grid[e].schedule, maps[e], std::nullopt});
        OccupancyMap diff = differential_map(maps[e]);
        double sigma = noise.level;
        if (noise.relative) {
            double peak = 0.0;
            for (double v : diff.values) peak = std::max(peak, std::fabs(v));
            sigma *= peak;
        }
        if (sigma > 0.0) {
            std::mt19937_64 rng(derive_seed(seed, e));
            std::normal_distribution<double> normal(0.0, sigma);
            for (double& v : diff.values) v += normal(rng);
            diff.sigma.assign(diff.values.size(), sigma);
        }
        out.measured.experiments.push_back({grid[e].schedule, std::move(diff)});
    }
    return out;
}

}  // namespace qrelax
