#pragma once

#include <stdexcept>
#include <string>

namespace gfrag {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition on an argument violated (e.g. x > y in flow_time).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The flow solver or a quadrature produced a non-finite value.
class IntegrationError : public Error {
public:
    using Error::Error;
};

/// No Malthus root could be bracketed within the sample/horizon budget.
class NoRootError : public Error {
public:
    using Error::Error;
};

/// Finite-difference derivative of L is not significantly negative.
class IllConditionedDerivative : public Error {
public:
    using Error::Error;
};

/// Estimated harmonic function is not strictly positive.
class InvalidHarmonic : public Error {
public:
    using Error::Error;
};

/// Malformed or incomplete configuration. `where` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string where, std::string message)
        : Error(where.empty() ? message : where + ": " + message),
          where_(std::move(where)),
          message_(std::move(message)) {}
    const std::string& where() const noexcept { return where_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string where_;
    std::string message_;
};

/// File system failure while reading or writing artifacts.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gfrag
