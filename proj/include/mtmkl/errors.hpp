#pragma once

#include <stdexcept>
#include <string>

namespace mtmkl {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition: bad dimensions, out-of-range parameters.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed or degenerate input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Failure inside an optimization stage; `stage()` names it.
class SolverError : public Error {
public:
    SolverError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Unreadable, corrupt or version-mismatched model file.
class FormatError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

}  // namespace detail
}  // namespace mtmkl
