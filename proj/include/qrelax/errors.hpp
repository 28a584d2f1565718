#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qrelax {

// Base for every recoverable error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration (bad domain values, broken invariants).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data files.
class DataFormatError : public Error {
public:
    using Error::Error;
};

class GridMismatch : public DataFormatError {
public:
    using DataFormatError::DataFormatError;
};

class TooFewPoints : public Error {
public:
    using Error::Error;
};

class DetuningOutOfRange : public Error {
public:
    DetuningOutOfRange(double epsilon, double x0, double half_separation);
    double epsilon() const { return epsilon_; }

private:
    double epsilon_;
};

class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double error_estimate);
    double error_estimate() const { return error_estimate_; }

private:
    double error_estimate_;
};

class DegenerateMap : public Error {
public:
    using Error::Error;
};

class NormalizationInfeasible : public Error {
public:
    using Error::Error;
};

class NotConverged : public Error {
public:
    NotConverged(const std::string& what, int iterations, double gradient_norm,
                 std::vector<double> best_iterate = {});
    int iterations() const { return iterations_; }
    double gradient_norm() const { return gradient_norm_; }
    // parameter vector of the lowest-cost point reached, when available
    const std::vector<double>& best_iterate() const { return best_iterate_; }

private:
    int iterations_;
    double gradient_norm_;
    std::vector<double> best_iterate_;
};

struct GridPointFailure {
    double offset;     // meV
    double frequency;  // Hz
    std::string message;
};

class ForwardModelFailure : public Error {
public:
    explicit ForwardModelFailure(std::vector<GridPointFailure> failures);
    const std::vector<GridPointFailure>& failures() const { return failures_; }

private:
    std::vector<GridPointFailure> failures_;
};

}  // namespace qrelax
