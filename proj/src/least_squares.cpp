#include "qrelax/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "qrelax/errors.hpp"

namespace qrelax {

Eigen::VectorXd finite_difference_steps(const Eigen::VectorXd& x, double relative_step) {
    Eigen::VectorXd h(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        h[j] = relative_step * std::max(std::fabs(x[j]), 1.0);
    }
    return h;
}

Eigen::MatrixXd forward_difference_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& r0, const Eigen::VectorXd& steps) {
    Eigen::MatrixXd jac(r0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Eigen::VectorXd xp = x;
        xp[j] += steps[j];
        jac.col(j) = (residual(xp) - r0) / steps[j];
    }
    return jac;
}

namespace {

std::optional<Eigen::VectorXd> try_residual(const ResidualFn& residual, const Eigen::VectorXd& x) {
    try {
        Eigen::VectorXd r = residual(x);
        if (!r.allFinite()) return std::nullopt;
        return r;
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

LeastSquaresResult levenberg_marquardt(const ResidualFn& residual, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& options,
                                       const JacobianFn& jacobian) {
    LeastSquaresResult out;
    out.x = x0;
    out.residual = residual(x0);
    out.evaluations = 1;
    if (!out.residual.allFinite()) {
        throw Error("least squares: residual is not finite at the starting point");
    }
    out.cost = out.residual.squaredNorm();
    out.cost_history.push_back(out.cost);

    const Eigen::Index n = x0.size();
    auto evaluate_jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
        const Eigen::VectorXd steps = options.absolute_step > 0.0
                                          ? Eigen::VectorXd::Constant(x.size(), options.absolute_step)
                                          : finite_difference_steps(x, options.relative_step);
        out.evaluations += static_cast<int>(n);
        if (jacobian) return jacobian(x, r, steps);
        return forward_difference_jacobian(residual, x, r, steps);
    };

    out.jacobian = evaluate_jacobian(out.x, out.residual);
    double damping = options.initial_damping;

    if ((options.lower_bounds.size() != 0 && options.lower_bounds.size() != n) ||
        (options.upper_bounds.size() != 0 && options.upper_bounds.size() != n)) {
        throw ConfigError("least squares: bound vectors must match the parameter count");
    }

    for (out.iterations = 0; out.iterations < options.max_iterations;) {
        Eigen::MatrixXd jtj = out.jacobian.transpose() * out.jacobian;
        Eigen::VectorXd grad = out.jacobian.transpose() * out.residual;
        // parameters pinned on a bound with the gradient pushing outward stay put
        for (Eigen::Index j = 0; j < n; ++j) {
            const bool at_lower = options.lower_bounds.size() == n && out.x[j] <= options.lower_bounds[j] && grad[j] > 0.0;
            const bool at_upper = options.upper_bounds.size() == n && out.x[j] >= options.upper_bounds[j] && grad[j] < 0.0;
            if (at_lower || at_upper) {
                jtj.row(j).setZero();
                jtj.col(j).setZero();
                grad[j] = 0.0;
            }
        }
        out.gradient_norm = grad.norm();
        if (out.gradient_norm <= options.gradient_tolerance * std::max(out.cost, 1e-300) ||
            out.cost == 0.0) {
            out.converged = true;
            return out;
        }

        const double diag_floor = 1e-12 * std::max(jtj.diagonal().maxCoeff(), 1e-300);
        bool accepted = false;
        bool stalled = false;
        for (int attempt = 0; attempt < options.max_rejections; ++attempt) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index j = 0; j < n; ++j) {
                a(j, j) += jtj(j, j) == 0.0 && grad[j] == 0.0 ? 1.0 : damping * std::max(jtj(j, j), diag_floor);
            }
            const Eigen::VectorXd step = a.ldlt().solve(-grad);
            if (!step.allFinite()) {
                damping *= 10.0;
                continue;
            }
            Eigen::VectorXd trial = out.x + step;
            if (options.lower_bounds.size() == n) trial = trial.cwiseMax(options.lower_bounds);
            if (options.upper_bounds.size() == n) trial = trial.cwiseMin(options.upper_bounds);
            const auto r = try_residual(residual, trial);
            ++out.evaluations;
            if (r && r->squaredNorm() < out.cost) {
                const double new_cost = r->squaredNorm();
                const double decrease = (out.cost - new_cost) / out.cost;
                const double rel_step = (trial - out.x).norm() / std::max(out.x.norm(), 1.0);
                out.x = trial;
                out.residual = *r;
                out.cost = new_cost;
                out.cost_history.push_back(new_cost);
                damping = std::max(damping / 5.0, 1e-12);
                accepted = true;
                stalled = decrease < options.cost_tolerance || rel_step < options.step_tolerance;
                break;
            }
            damping *= 10.0;
        }
        ++out.iterations;
        if (!accepted) {
            // no downhill step at any damping: a (numerical) stationary point
            out.converged = true;
            out.gradient_norm = grad.norm();
            return out;
        }
        out.jacobian = evaluate_jacobian(out.x, out.residual);
        if (stalled) {
            out.gradient_norm = (out.jacobian.transpose() * out.residual).norm();
            out.converged = true;
            return out;
        }
    }
    out.gradient_norm = (out.jacobian.transpose() * out.residual).norm();
    return out;
}

}  // namespace qrelax
