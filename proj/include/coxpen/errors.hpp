#pragma once

#include <stdexcept>
#include <string>

namespace coxpen {

// Base class for every error raised by the library. `kind()` is a stable
// machine-readable tag used by the CLI when reporting failures on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error("validation_error", what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("numeric_error", what) {}
};

// A request that has no unique answer (e.g. unpenalized Cox with p >= events).
class IllPosedError : public Error {
public:
    explicit IllPosedError(const std::string& what) : Error("ill_posed", what) {}
};

// A statistic that is undefined for the given input (no usable pairs, ...).
class UndefinedError : public Error {
public:
    explicit UndefinedError(const std::string& what) : Error("undefined", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io_error", what) {}
};

} // namespace coxpen
