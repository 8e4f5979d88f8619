#ifndef WSGAT_ERRORS_HPP
#define WSGAT_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsgat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the offending path and 1-based line.
class ParseError : public Error {
public:
    ParseError(std::string path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what),
          path_(std::move(path)), line_(line) {}

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string path_;
    std::size_t line_;
};

class EmptyGraphError : public Error {
public:
    using Error::Error;
};

/// Negative sampling could not find enough non-adjacent pairs.
class SamplingExhaustedError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf produced by an operation (forward values or gradients).
class NumericFault : public Error {
public:
    using Error::Error;
};

/// Misuse of the tape, e.g. a second backward pass without reset.
class TapeError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The requested task is meaningless on the given graph (e.g. sign
/// prediction on a graph with a single sign).
class DegenerateTaskError : public Error {
public:
    using Error::Error;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

}  // namespace wsgat

#endif  // WSGAT_ERRORS_HPP
