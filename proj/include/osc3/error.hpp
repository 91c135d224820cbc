#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace osc3 {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed expression text; `offset` is the byte offset of the offending token.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset(offset) {}
    std::size_t offset;
};

/// Evaluation outside a function's domain (log of non-positive, division by zero, ...).
struct DomainError : Error {
    using Error::Error;
};

struct PreconditionError : Error {
    using Error::Error;
};

/// Integration failure at time `t` (step-size underflow, too many steps, bad coefficient).
struct IntegrationError : Error {
    IntegrationError(const std::string& what, double t)
        : Error(what + " at t=" + std::to_string(t)), t(t) {}
    double t;
};

/// Phase point too close to a pole of the spherical system (y = y' = 0), azimuth undefined.
struct PoleError : Error {
    PoleError(const std::string& what, double t = 0.0) : Error(what), t(t) {}
    double t;
};

struct ConstructionError : Error {
    using Error::Error;
};

struct TrackMismatchError : Error {
    TrackMismatchError(const std::string& what, double t, double deviation)
        : Error(what + " (deviation " + std::to_string(deviation) + " at t=" + std::to_string(t) + ")"),
          t(t), deviation(deviation) {}
    double t;
    double deviation;
};

}  // namespace osc3
