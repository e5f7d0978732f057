#pragma once

#include <stdexcept>
#include <string>

namespace dcq {

// Input outside the domain of an operation (Re s <= 0, |zeta| >= 1, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Bad configuration or inadmissible parameters. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mesh parsing or validation failure. Treated as a configuration problem by the CLI.
struct MeshError : ConfigError {
    using ConfigError::ConfigError;
};

// Solver breakdown, loss of coercivity, ill-conditioned contour. CLI exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dcq
