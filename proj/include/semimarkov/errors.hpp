#pragma once

#include <stdexcept>
#include <string>

namespace semimarkov {

// model file or argument problems; CLI maps these to exit code 2
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// a moment generating function diverges at the requested exponent, or the
// limit system is singular; CLI maps these to exit code 3
struct FinitenessError : std::runtime_error {
    explicit FinitenessError(const std::string& what) : std::runtime_error(what) {}
};

// an iteration failed to converge within its budget
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// two routes that must agree disagreed beyond tolerance
struct ConsistencyError : std::runtime_error {
    explicit ConsistencyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace semimarkov
