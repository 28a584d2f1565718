#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "qrelax/errors.hpp"
#include "qrelax/inference.hpp"

namespace qrelax {

// ---------------------------------------------------------------- phenomenological

PhenomFit fit_phenom_params(const RateCurve& target, const QubitParams& qubit, const PhenomSpectral& init,
                            std::span<const double> epsilons) {
    const std::vector<double> points =
        epsilons.empty() ? target.knots() : std::vector<double>(epsilons.begin(), epsilons.end());
    if (points.size() < 3) throw TooFewPoints("fit_phenom_params: need at least 3 evaluation points");
    std::vector<double> goal;
    for (double e : points) goal.push_back(target.log_rate(e));

    const ResidualFn residual = [&](const Eigen::VectorXd& p) {
        const PhenomSpectral model(p[0], std::exp(p[1]), std::exp(p[2]));
        Eigen::VectorXd r(static_cast<Eigen::Index>(points.size()));
        for (std::size_t i = 0; i < points.size(); ++i) {
            r[static_cast<Eigen::Index>(i)] = std::log(relaxation_rate(points[i], qubit, model)) - goal[i];
        }
        return r;
    };
    Eigen::VectorXd x0(3);
    x0 << init.s_exponent, std::log(init.coupling_alpha), std::log(init.omega_c);
    LeastSquaresOptions opt;
    opt.max_iterations = 300;
    opt.relative_step = 1e-7;
    opt.cost_tolerance = 1e-16;
    opt.step_tolerance = 1e-13;
    const LeastSquaresResult ls = levenberg_marquardt(residual, x0, opt);
    if (!ls.converged) {
        throw NotConverged("fit_phenom_params: iteration limit reached", ls.iterations, ls.gradient_norm,
                           std::vector<double>(ls.x.data(), ls.x.data() + ls.x.size()));
    }
    return {PhenomSpectral(ls.x[0], std::exp(ls.x[1]), std::exp(ls.x[2])), ls.cost, ls.iterations, true};
}

// ---------------------------------------------------------------- microscopic

RateCurve micro_rate_curve(const DotGeometry& geometry, const Material& material, const QubitParams& qubit,
                           double e_max, int table_knots) {
    const MicroSpectral model(geometry, material);
    const SpectralModel sm = model;
    return RateCurve::tabulate(uniform_knots(e_max, table_knots), [&](double eps) {
        const double g = relaxation_rate(eps, qubit, sm);
        return std::max(g, std::numeric_limits<double>::min());
    });
}

namespace {

struct MicroModel {
    QubitParams qubit;
    RateCurve curve;
};

MicroModel micro_model(double e0, double ez, double half_separation, const Material& material, double e_max,
                       const MicroFitOptions& options) {
    const DotGeometry geom(e0, ez, half_separation, options.b_field);
    const QubitParams qubit(tunnel_coupling(geom, 0.0), options.temperature);
    return {qubit, micro_rate_curve(geom, material, qubit, e_max, options.table_knots)};
}

Eigen::VectorXd micro_residual(std::span<const Experiment> data, const MicroModel& m, const MapOptions& map) {
    const auto maps = forward_model(data, [&](double eps) { return m.curve(eps); }, m.qubit, map);
    std::size_t size = 0;
    for (const auto& e : data) size += e.occupancy.values.size();
    Eigen::VectorXd r(static_cast<Eigen::Index>(size));
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const OccupancyMap seen = apply_processing(data[i], maps[i]);
        for (std::size_t j = 0; j < seen.values.size(); ++j) r[k++] = seen.values[j] - data[i].occupancy.values[j];
    }
    return r;
}

}  // namespace

double micro_misfit(std::span<const Experiment> data, const Material& material, double ez, double e0,
                    double half_separation, const MicroFitOptions& options) {
    const double reach = detuning_reach(data);
    return micro_residual(data, micro_model(e0, ez, half_separation, material, reach, options), options.map)
        .squaredNorm();
}

MicroFit fit_micro_params(std::span<const Experiment> data, const Material& material, double ez, double e0_init,
                          double half_separation_init, const MicroFitOptions& options) {
    material.validate();
    if (data.empty()) throw TooFewPoints("fit_micro_params: no experiments");
    const double reach = detuning_reach(data);
    const ResidualFn residual = [&](const Eigen::VectorXd& p) {
        return micro_residual(data, micro_model(std::exp(p[0]), ez, std::exp(p[1]), material, reach, options),
                              options.map);
    };
    Eigen::VectorXd x0(2);
    x0 << std::log(e0_init), std::log(half_separation_init);
    const LeastSquaresResult ls = levenberg_marquardt(residual, x0, options.solver);
    if (!ls.converged) {
        throw NotConverged("fit_micro_params: iteration limit reached", ls.iterations, ls.gradient_norm,
                           {std::exp(ls.x[0]), std::exp(ls.x[1])});
    }
    MicroFit out;
    out.e0 = std::exp(ls.x[0]);
    out.half_separation = std::exp(ls.x[1]);
    out.implied_delta = tunnel_coupling(DotGeometry(out.e0, ez, out.half_separation, options.b_field), 0.0);
    out.misfit = ls.cost;
    out.iterations = ls.iterations;
    out.converged = true;
    return out;
}

// ---------------------------------------------------------------- temperature

double fit_electron_temperature(std::span<const double> epsilon, std::span<const double> occupancy, double delta) {
    if (epsilon.size() != occupancy.size()) throw DataFormatError("temperature fit: length mismatch");
    if (epsilon.size() < 3) throw TooFewPoints("temperature fit needs at least 3 points");
    if (!(delta > 0.0)) throw ConfigError("temperature fit: delta must be > 0");

    auto cost = [&](double log_t, bool right) {
        const double t = std::exp(log_t);
        double c = 0.0;
        for (std::size_t i = 0; i < epsilon.size(); ++i) {
            const double p = right ? equilibrium_occupancy_R(epsilon[i], delta, t)
                                   : equilibrium_occupancy_L(epsilon[i], delta, t);
            c += (occupancy[i] - p) * (occupancy[i] - p);
        }
        return c;
    };

    const double lo = std::log(1e-3);
    const double hi = std::log(1e3);
    const int grid = 121;
    double best = std::numeric_limits<double>::infinity();
    int best_i = 0;
    bool right = false;
    for (bool r : {false, true}) {
        for (int i = 0; i < grid; ++i) {
            const double c = cost(lo + (hi - lo) * i / (grid - 1), r);
            if (c < best) {
                best = c;
                best_i = i;
                right = r;
            }
        }
    }
    if (best_i == 0 || best_i == grid - 1) {
        throw NotConverged("temperature fit: minimum at the edge of [1 mK, 1000 K]", grid, 0.0);
    }
    const double step = (hi - lo) / (grid - 1);
    const auto [log_t, c] = boost::math::tools::brent_find_minima(
        [&](double x) { return cost(x, right); }, lo + (best_i - 1) * step, lo + (best_i + 1) * step, 50);
    (void)c;
    return std::exp(log_t);
}

}  // namespace qrelax
