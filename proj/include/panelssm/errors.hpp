#ifndef PANELSSM_ERRORS_HPP
#define PANELSSM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace panelssm {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed parameter name ("K[unit2", "K[]", nested brackets).
struct NameFormatError : Error {
    using Error::Error;
};

// Reference to a parameter that does not exist in the target set.
struct UnknownParameterError : Error {
    using Error::Error;
};

// Natural-scale value outside the domain of its transform.
struct TransformDomainError : Error {
    using Error::Error;
};

// lower > upper or a negative intensity.
struct BoundsError : Error {
    using Error::Error;
};

// Generic bad-argument error (empty input, ragged matrix, ...).
struct ArgumentError : Error {
    using Error::Error;
};

// Math-domain violation (nonpositive state, degenerate density, ...).
struct DomainError : Error {
    using Error::Error;
};

// Panel assembly failed (name overlap, missing defaults, ...).
struct ConstructionError : Error {
    using Error::Error;
};

// A required model function slot is missing.
struct CapabilityError : Error {
    using Error::Error;
};

// Not enough points (or degenerate geometry) for local regression.
struct SmoothingError : Error {
    using Error::Error;
};

// Invalid experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

// File read/write failure.
struct IoError : Error {
    using Error::Error;
};

// All particle weights vanished or became non-finite at one time point.
// Carries the unit and the (1-based) observation index where it happened.
struct FilteringFailure : Error {
    std::string unit;
    std::size_t time_index;

    FilteringFailure(std::string unit_name, std::size_t n, const std::string& what_arg)
        : Error(what_arg), unit(std::move(unit_name)), time_index(n) {}
};

}  // namespace panelssm

#endif
