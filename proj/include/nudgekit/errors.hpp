#pragma once

#include <stdexcept>
#include <string>

namespace nudgekit {

// Bad or inconsistent input data (corrupt traces, missing models, ...).
// The CLI maps this to exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration (unknown keys, invalid thresholds, ...).
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace nudgekit
