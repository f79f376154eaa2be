#pragma once

#include <stdexcept>
#include <string>

namespace wlm {

// Base of every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input or a violated precondition on user data.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A configured size cap would be exceeded.
class CapExceeded : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class UnboundedError : public Error {
public:
    using Error::Error;
};

// The solver finished but its answer failed the optimality certificate.
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace wlm
