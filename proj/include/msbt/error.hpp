#pragma once

#include <stdexcept>
#include <string>

namespace msbt {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shapes that cannot be combined (matmul inner dims, broadcast, width contracts).
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration (unknown modality, schedule hitting zero, bad config file).
struct ConfigError : Error {
    using Error::Error;
};

// Mathematical domain violations (log of nonpositive, score outside (0,1)).
struct DomainError : Error {
    using Error::Error;
};

// API contract violations (non-scalar loss, missing fused pair, mutating a non-leaf).
struct ContractError : Error {
    using Error::Error;
};

// File I/O problems: missing files, malformed manifests, corrupt checkpoints.
struct IoError : Error {
    using Error::Error;
};

}  // namespace msbt
