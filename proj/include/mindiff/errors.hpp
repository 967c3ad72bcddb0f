#pragma once

#include <stdexcept>
#include <string>

namespace mindiff {

// Bad user-supplied configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// CSV schema problems: missing columns etc.
struct SchemaError : ConfigError {
    explicit SchemaError(const std::string& msg) : ConfigError(msg) {}
};

// A strategy requires a conditioned example pool that the dataset cannot fill.
struct StreamError : std::runtime_error {
    explicit StreamError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CalibrationError : std::runtime_error {
    explicit CalibrationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses/gradients and similar mid-training aborts.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mindiff
