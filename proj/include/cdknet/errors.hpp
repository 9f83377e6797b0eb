#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdknet {

// Base class for every error this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct InvalidMatrix : Error {
    using Error::Error;
};

// Eigensolver failed to converge; carries the iteration count that was hit.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, std::size_t iters)
        : Error(what + " (after " + std::to_string(iters) + " iterations)"),
          iterations(iters) {}
    std::size_t iterations;
};

struct DegenerateBandwidth : Error {
    using Error::Error;
};

struct DegenerateKernel : Error {
    using Error::Error;
};

struct UnsupportedKernel : Error {
    using Error::Error;
};

struct TooManyClusters : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

struct LabelError : Error {
    using Error::Error;
};

struct NoNewClasses : Error {
    using Error::Error;
};

struct PackingError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// A required prior-stage artifact (checkpoint, pseudo-labels, ...) is absent.
struct MissingArtifact : Error {
    MissingArtifact(const std::string& what, std::string path)
        : Error(what + ": " + path), expected_path(std::move(path)) {}
    std::string expected_path;
};

}  // namespace cdknet
