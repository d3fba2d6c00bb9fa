#pragma once

#include <stdexcept>
#include <string>

namespace sqr {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied something the contract rejects (bad parameters, bad sizes,
/// missing files). The CLI maps these to exit code 1.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A parameter lies outside its declared range.
class RangeViolation : public InvalidArgument {
public:
    RangeViolation(std::string parameter, const std::string& what)
        : InvalidArgument(what), parameter_(std::move(parameter)) {}
    const std::string& parameter() const noexcept { return parameter_; }

private:
    std::string parameter_;
};

/// Numerical evaluation produced a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Tensor or layer shapes do not agree.
class ShapeError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// A file could not be decoded (bad magic, truncated payload, version mismatch).
class FormatError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sqr
