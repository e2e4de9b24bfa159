#pragma once

#include <stdexcept>
#include <string>

namespace rfstab {

// Exception families map onto the CLI exit codes (2 config, 3 data, 4 evaluation).

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class EvaluationError : public std::runtime_error {
public:
    explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace rfstab
