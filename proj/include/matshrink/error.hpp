#pragma once

#include <stdexcept>
#include <string>

namespace matshrink {

// Base of every error thrown by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// X^T X is singular or too badly conditioned to invert.
class SingularGram : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

// A prior's gradient or Laplacian was requested on its singular set.
class SingularPoint : public Error {
public:
    using Error::Error;
};

class Unsupported : public Error {
public:
    using Error::Error;
};

class NonFiniteEvaluation : public Error {
public:
    using Error::Error;
};

class ZeroColumn : public Error {
public:
    using Error::Error;
};

// An operation that needs n - p - 1 > 0 was called outside that regime.
class RegimeViolation : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace matshrink
