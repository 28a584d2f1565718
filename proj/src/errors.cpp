#include "qrelax/errors.hpp"

#include <sstream>

namespace qrelax {

namespace {
std::string detuning_message(double epsilon, double x0, double half_separation) {
    std::ostringstream os;
    os << "detuning " << epsilon << " meV puts the potential crossing at x0 = " << x0
       << " nm, outside (-L, L) with L = " << half_separation << " nm";
    return os.str();
}

std::string failure_message(const std::vector<GridPointFailure>& failures) {
    std::ostringstream os;
    os << failures.size() << " grid point(s) failed";
    if (!failures.empty()) {
        const auto& f = failures.front();
        os << "; first at offset " << f.offset << " meV, f = " << f.frequency << " Hz: " << f.message;
    }
    return os.str();
}
}  // namespace

DetuningOutOfRange::DetuningOutOfRange(double epsilon, double x0, double half_separation)
    : Error(detuning_message(epsilon, x0, half_separation)), epsilon_(epsilon) {}

QuadratureError::QuadratureError(const std::string& what, double error_estimate)
    : Error(what), error_estimate_(error_estimate) {}

NotConverged::NotConverged(const std::string& what, int iterations, double gradient_norm,
                           std::vector<double> best_iterate)
    : Error(what), iterations_(iterations), gradient_norm_(gradient_norm), best_iterate_(std::move(best_iterate)) {}

ForwardModelFailure::ForwardModelFailure(std::vector<GridPointFailure> failures)
    : Error(failure_message(failures)), failures_(std::move(failures)) {}

}  // namespace qrelax
