#pragma once

#include <stdexcept>
#include <string>

namespace labelaug {

// Error categories map onto the CLI exit codes: config/shape problems are
// fixable by editing the run configuration, data problems by fixing inputs.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace labelaug
