#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mohv {

// Caller broke a documented precondition (shape mismatch, non-finite input,
// dominated point handed to a gradient routine, stale tape, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Geometry kernels only support two or three objectives.
class UnsupportedDimension : public std::invalid_argument {
public:
    explicit UnsupportedDimension(std::size_t n)
        : std::invalid_argument("unsupported objective count " + std::to_string(n) + " (expected 2 or 3)"),
          dimension(n) {}
    std::size_t dimension;
};

// A non-finite loss showed up during training.
class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(std::string const& what, std::size_t iteration_, std::size_t network_, std::size_t sample_)
        : std::runtime_error(what), iteration(iteration_), network(network_), sample(sample_) {}
    std::size_t iteration;
    std::size_t network;
    std::size_t sample;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string const& what, std::size_t line_ = 0, std::string key_ = {})
        : std::runtime_error(line_ ? "line " + std::to_string(line_) + ": " + what : what),
          line(line_), key(std::move(key_)) {}
    std::size_t line;
    std::string key;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, char const* message) {
    if (!condition) throw ContractViolation(message);
}

inline void require(bool condition, std::string const& message) {
    if (!condition) throw ContractViolation(message);
}

} // namespace mohv
