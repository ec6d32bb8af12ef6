#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geoedit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values or missing configuration sections.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Caller-supplied data violates an operation's precondition.
class InputError : public Error {
public:
    using Error::Error;
};

/// Mismatched shapes, layouts or model configurations.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared during an optimisation run.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    long step() const noexcept { return step_; }

private:
    long step_;
};

/// A line of an input file could not be parsed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A parsed record is missing fields or breaks a record invariant.
class SchemaError : public Error {
public:
    SchemaError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Synthetic data generation cannot satisfy the requested sizes.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Data has no spread (e.g. all points identical).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

/// Angle requested between vectors of (near) zero length.
class DegenerateAngleError : public Error {
public:
    using Error::Error;
};

/// Filesystem or checkpoint format failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failed; wraps the original message with the stage name.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what)
        : Error("stage " + stage + ": " + what), stage_(stage) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace geoedit
