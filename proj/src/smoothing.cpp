#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "qrelax/errors.hpp"
#include "qrelax/inference.hpp"
#include "qrelax/units.hpp"

namespace qrelax {

double SmoothedTrace::occupancy(double offset) const {
    const double x = offset - center;
    double n = 0.5;
    if (coefficients.empty()) return n;
    n += coefficients[0] * x;
    for (std::size_t k = 1; k < coefficients.size(); ++k) {
        const double w = static_cast<double>(k) * kPi / half_width;
        n += coefficients[k] * std::sin(w * x) / w;
    }
    return n;
}

double SmoothedTrace::differential(double offset) const {
    const double x = offset - center;
    double m = 0.0;
    for (std::size_t k = 0; k < coefficients.size(); ++k) {
        m += coefficients[k] * std::cos(static_cast<double>(k) * kPi * x / half_width);
    }
    return m;
}

namespace {

int distinct_abs_count(const std::vector<double>& x, double scale) {
    std::vector<double> a;
    a.reserve(x.size());
    for (double v : x) a.push_back(std::fabs(v));
    std::sort(a.begin(), a.end());
    int count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i == 0 || a[i] - a[i - 1] > 1e-12 * scale) ++count;
    }
    return count;
}

struct Prepared {
    std::vector<double> x;  // offsets relative to the center
    Eigen::VectorXd w;      // 1 / sigma
    Eigen::VectorXd d;
    double half_width = 0.0;
    int distinct = 0;
};

Prepared prepare(std::span<const double> offsets, std::span<const double> trace, std::span<const double> sigma,
                 const SmoothingOptions& options) {
    const std::size_t n = offsets.size();
    if (trace.size() != n || (!sigma.empty() && sigma.size() != n)) {
        throw DataFormatError("smoothing: offsets, trace and sigma lengths differ");
    }
    if (options.n_modes < 2) throw ConfigError("smoothing.n_modes must be >= 2");
    if (n < 3) throw TooFewPoints("smoothing needs at least 3 points");

    Prepared p;
    p.x.resize(n);
    double lo = offsets[0];
    double hi = offsets[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(offsets[i]) || !std::isfinite(trace[i])) {
            throw DataFormatError("smoothing: non-finite offset or trace value");
        }
        p.x[i] = offsets[i] - options.center;
        lo = std::min(lo, offsets[i]);
        hi = std::max(hi, offsets[i]);
    }
    if (!(lo <= options.center && options.center <= hi)) {
        std::ostringstream os;
        os << "smoothing: trace over [" << lo << ", " << hi << "] meV does not span the center " << options.center;
        throw ConfigError(os.str());
    }
    for (double v : p.x) p.half_width = std::max(p.half_width, std::fabs(v));

    p.w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
            throw DataFormatError("smoothing: sigma must be finite and > 0");
        }
        p.w[static_cast<Eigen::Index>(i)] = 1.0 / sigma[i];
    }
    p.d.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) p.d[static_cast<Eigen::Index>(i)] = trace[i];
    p.distinct = distinct_abs_count(p.x, p.half_width);
    return p;
}

// Weighted least squares onto the first `modes` cosines, normalized but not
// yet range-checked.
SmoothedTrace fit_modes(const Prepared& p, const SmoothingOptions& options, int modes) {
    const auto n = static_cast<Eigen::Index>(p.x.size());
    Eigen::MatrixXd basis(n, modes);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < modes; ++k) {
            basis(i, k) = std::cos(k * kPi * p.x[static_cast<std::size_t>(i)] / p.half_width);
        }
    }
    const Eigen::MatrixXd a = p.w.asDiagonal() * basis;
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(p.w.asDiagonal() * p.d);
    const Eigen::VectorXd resid = p.d - basis * c;

    SmoothedTrace out;
    out.center = options.center;
    out.half_width = p.half_width;
    out.modes_used = modes;
    out.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));

    double scale = 1.0;
    if (options.normalization == Normalization::Unit && c.cwiseAbs().maxCoeff() > 0.0) {
        const double swing = 2.0 * c[0] * p.half_width;
        if (!(std::fabs(swing) > 1e-12 * c.cwiseAbs().sum() * p.half_width)) {
            throw NormalizationInfeasible("smoothing: differential integrates to zero across the window");
        }
        scale = 1.0 / swing;
    }
    out.scale = scale;
    out.coefficients.assign(c.data(), c.data() + c.size());
    for (double& v : out.coefficients) v *= scale;
    const double dof = static_cast<double>(n) - modes;
    out.noise_estimate = dof > 0 ? std::fabs(scale) * std::sqrt(resid.squaredNorm() / dof) : 0.0;
    return out;
}

}  // namespace

SmoothedTrace smooth_to_occupancy(std::span<const double> offsets, std::span<const double> trace,
                                  std::span<const double> sigma, const SmoothingOptions& options) {
    const Prepared p = prepare(offsets, trace, sigma, options);
    const int max_modes = std::min(options.n_modes, p.distinct);
    for (int modes = max_modes; modes >= 2; --modes) {
        SmoothedTrace out = fit_modes(p, options, modes);
        double excursion = 0.0;  // max |n - 0.5|
        for (double off : offsets) excursion = std::max(excursion, std::fabs(out.occupancy(off) - 0.5));
        const double overshoot = excursion - 0.5;
        if (overshoot > options.overshoot_tolerance) continue;
        if (overshoot > 0.0) {
            const double squeeze = 0.5 / excursion;
            for (double& v : out.coefficients) v *= squeeze;
            out.scale *= squeeze;
            out.noise_estimate *= squeeze;
        }
        return out;
    }
    std::ostringstream os;
    os << "smoothing: no mode count <= " << options.n_modes << " keeps n within [0, 1]";
    throw NormalizationInfeasible(os.str());
}

OccupancyMap apply_processing(const Experiment& experiment, const OccupancyMap& model) {
    if (!experiment.processing) return model;
    const TraceProcessing& proc = *experiment.processing;
    if (proc.modes.size() != model.freqs.size()) {
        throw GridMismatch("processing: mode list does not match the frequency grid");
    }
    const OccupancyMap diff = differential_map(model);
    OccupancyMap out(model.offsets, model.freqs);
    const std::size_t n = model.offsets.size();
    for (std::size_t fi = 0; fi < model.freqs.size(); ++fi) {
        const auto sig = proc.sigma.empty() ? std::span<const double>{}
                                            : std::span<const double>(proc.sigma).subspan(fi * n, n);
        SmoothingOptions opt = proc.options;
        opt.n_modes = std::max(proc.modes[fi], 2);
        const Prepared p = prepare(model.offsets, diff.row(fi), sig, opt);
        const SmoothedTrace t = fit_modes(p, opt, std::min(opt.n_modes, p.distinct));
        for (std::size_t oi = 0; oi < n; ++oi) out.at(fi, oi) = t.occupancy(model.offsets[oi]);
    }
    return out;
}

SmoothedSet smooth_measured(const MeasuredSet& data, const SmoothingOptions& options) {
    SmoothedSet out;
    for (const auto& e : data.experiments) {
        const OccupancyMap& dm = e.differential;
        dm.validate(false);
        OccupancyMap occ(dm.offsets, dm.freqs);
        TraceProcessing proc{options, {}, dm.sigma};
        std::vector<SmoothedTrace> traces;
        for (std::size_t fi = 0; fi < dm.freqs.size(); ++fi) {
            const auto sig = dm.sigma.empty() ? std::span<const double>{}
                                              : std::span<const double>(dm.sigma).subspan(
                                                    fi * dm.offsets.size(), dm.offsets.size());
            SmoothedTrace t = smooth_to_occupancy(dm.offsets, dm.row(fi), sig, options);
            for (std::size_t oi = 0; oi < dm.offsets.size(); ++oi) occ.at(fi, oi) = t.occupancy(dm.offsets[oi]);
            proc.modes.push_back(t.modes_used);
            traces.push_back(std::move(t));
        }
        out.experiments.push_back({e.schedule, std::move(occ), std::move(proc)});
        out.traces.push_back(std::move(traces));
    }
    return out;
}

}  // namespace qrelax
