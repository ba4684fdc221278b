#pragma once

#include <stdexcept>
#include <string>

namespace biaslab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A matrix that must be positive definite failed the Cholesky pivot test.
/// `what_matrix()` names the offending matrix (e.g. "Cov(Z,W)").
class NotPositiveDefinite : public Error {
public:
    explicit NotPositiveDefinite(std::string matrix_name, const std::string& detail = {})
        : Error("matrix " + matrix_name + " is not positive definite" +
                (detail.empty() ? std::string{} : ": " + detail)),
          matrix_name_(std::move(matrix_name))
    {
    }

    const std::string& what_matrix() const noexcept { return matrix_name_; }

private:
    std::string matrix_name_;
};

class NotSymmetric : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class PreconditionViolated : public Error {
public:
    using Error::Error;
};

class GenerationFailed : public Error {
public:
    using Error::Error;
};

class RankDeficient : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class UnknownPollutant : public Error {
public:
    using Error::Error;
};

/// Input document does not match the expected schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

} // namespace biaslab
