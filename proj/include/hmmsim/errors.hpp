#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmmsim {

/// Base of every error the engine raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Out-of-range numeric parameter (kernel widths, step sizes, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Parameters that are individually fine but do not fit together,
/// e.g. a window that is not a whole number of micro steps.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Length or dimension mismatch between vectors, samples or layouts.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A non-finite value appeared during integration.
class DivergenceError : public Error {
public:
    DivergenceError(double time, std::string variable, std::int64_t step, const std::string& what)
        : Error(what), time_(time), variable_(std::move(variable)), step_(step) {}

    double time() const noexcept { return time_; }
    const std::string& variable() const noexcept { return variable_; }
    std::int64_t step() const noexcept { return step_; }

private:
    double time_;
    std::string variable_;
    std::int64_t step_;
};

/// Collects every violated invariant instead of stopping at the first one.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : Error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "validation failed:";
        for (const auto& issue : issues) {
            out += "\n  - ";
            out += issue;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

/// Steady-state initialization did not converge.
class InitializationError : public Error {
public:
    InitializationError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Two traces could not be compared (no overlap, missing variable).
class ComparisonError : public Error {
public:
    using Error::Error;
};

/// Eigen-analysis failure.
class DiagnosticError : public Error {
public:
    using Error::Error;
};

/// Scenario file could not be parsed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line) : Error(what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace hmmsim
