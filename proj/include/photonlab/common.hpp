#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace photonlab {

inline constexpr double PI = 3.14159265358979323846;
inline constexpr double TWO_PI = 2.0 * PI;

// error classes map 1:1 onto CLI exit codes, see tools/photonlab.cpp

// bad or inconsistent configuration (schema, ranges, cross-field constraints)
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// caller violated a documented precondition of an operation
struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

// request is valid in form but physically/mathematically unsatisfiable
struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

// malformed input data; carries the byte offset of the defect
struct ParseError : std::runtime_error {
    uint64_t offset;
    ParseError(const std::string& msg, uint64_t off)
        : std::runtime_error(msg + " (byte offset " + std::to_string(off) + ")"),
          offset(off) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// iterative routine failed to converge; message carries diagnostics
struct FitError : std::runtime_error {
    explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

// datasets fed to one analysis were produced under different physics configs
struct LineageError : std::runtime_error {
    explicit LineageError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace photonlab
