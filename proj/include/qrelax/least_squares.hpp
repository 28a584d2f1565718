#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

namespace qrelax {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Optional Jacobian override. Receives the point, its residual vector and the
// per-parameter finite-difference steps; must return d(residual)/d(x).
using JacobianFn =
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>;

struct LeastSquaresOptions {
    int max_iterations = 100;
    double relative_step = 1e-4;      // forward-difference step, relative to max(|x_j|, 1)
    double absolute_step = 0.0;       // when > 0, the step for every parameter instead
    double cost_tolerance = 1e-12;    // relative cost decrease that counts as stalled
    double step_tolerance = 1e-10;    // relative parameter step that counts as converged
    double gradient_tolerance = 1e-14;
    double initial_damping = 1e-3;
    int max_rejections = 12;          // consecutive damped retries before giving up
    // optional box constraints; trial points are clamped into the box
    Eigen::VectorXd lower_bounds;
    Eigen::VectorXd upper_bounds;

    static LeastSquaresOptions with(int max_iterations, double cost_tolerance, double step_tolerance) {
        LeastSquaresOptions o;
        o.max_iterations = max_iterations;
        o.cost_tolerance = cost_tolerance;
        o.step_tolerance = step_tolerance;
        return o;
    }
    LeastSquaresOptions log_step(double step) const {
        LeastSquaresOptions o = *this;
        o.absolute_step = step;
        return o;
    }
};

struct LeastSquaresResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residual;
    Eigen::MatrixXd jacobian;         // at x
    double cost = 0.0;                // sum of squared residuals
    double gradient_norm = 0.0;       // |J^T r| at x
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<double> cost_history; // one entry per accepted iterate, non-increasing
};

Eigen::VectorXd finite_difference_steps(const Eigen::VectorXd& x, double relative_step);

Eigen::MatrixXd forward_difference_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& r0, const Eigen::VectorXd& steps);

// Levenberg-Marquardt minimisation of |r(x)|^2 with Marquardt diagonal
// scaling. Only cost-decreasing steps are accepted. With bounds, trial points
// are projected into the box. Residual evaluations that
// throw qrelax::Error are treated as rejected trial steps.
LeastSquaresResult levenberg_marquardt(const ResidualFn& residual, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& options = {},
                                       const JacobianFn& jacobian = {});

}  // namespace qrelax
