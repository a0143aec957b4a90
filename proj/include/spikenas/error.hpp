#pragma once

#include <stdexcept>
#include <string>

namespace spikenas {

// Shape/contract violations raised by tensor ops. Messages name the
// offending axes so callers can report them verbatim.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File parsing / serialization failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check_shape(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace spikenas
