#pragma once

#include <stdexcept>
#include <string>

namespace unlearn {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy. The CLI maps ValidationError (and subclasses) to exit
// code 2 and SolverError (and subclasses) to exit code 3.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

struct ParseError : ValidationError {
    explicit ParseError(const std::string& msg) : ValidationError(msg) {}
};

struct SolverError : Error {
    explicit SolverError(const std::string& msg) : Error(msg) {}
};

struct DivergenceError : SolverError {
    explicit DivergenceError(const std::string& msg) : SolverError(msg) {}
};

struct OracleError : SolverError {
    explicit OracleError(const std::string& msg) : SolverError(msg) {}
};

}  // namespace unlearn
