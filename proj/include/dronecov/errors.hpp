#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dronecov {

/// Invalid argument or degenerate geometry (e.g. zero link length).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested order or size exceeds what the implementation supports.
class CapabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Counters attached to a failed numerical evaluation.
struct NumericDiagnostics {
    std::size_t evaluations = 0;
    std::size_t subdivisions = 0;
    double error_estimate = 0.0;
    double radius = 0.0;
};

/// Quadrature failed to converge, or a probability left its admissible range.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, NumericDiagnostics diag)
        : std::runtime_error(what), diagnostics_(diag) {}

    const NumericDiagnostics& diagnostics() const noexcept { return diagnostics_; }

private:
    NumericDiagnostics diagnostics_;
};

/// Bad configuration text or sweep definition. Carries the offending key and line (0 if unknown).
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key, std::size_t line, const std::string& message)
        : std::runtime_error(format(key, line, message)), key_(key), line_(line) {}

    const std::string& key() const noexcept { return key_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& key, std::size_t line, const std::string& message) {
        std::string out;
        if (line > 0) out += "line " + std::to_string(line) + ": ";
        if (!key.empty()) out += "'" + key + "': ";
        return out + message;
    }

    std::string key_;
    std::size_t line_;
};

}  // namespace dronecov
