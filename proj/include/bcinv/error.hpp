#pragma once

#include <stdexcept>
#include <string>

namespace bcinv {

/// Argument outside the mathematical domain of an operation
/// (basis index out of range, time outside [0,2T), ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Inconsistent or invalid configuration: grid mismatch, CFL violation,
/// missing file, non power-of-two resolution.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: non-finite values, blow-up, non-convergent iteration.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Process exit codes used by the CLI.
enum ExitCode : int {
    kExitOk = 0,
    kExitNumeric = 1,
    kExitConfig = 2,
};

}  // namespace bcinv
