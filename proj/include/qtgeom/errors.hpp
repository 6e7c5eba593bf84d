#pragma once

#include <stdexcept>
#include <string>

namespace qtgeom {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad JSON, schema mismatch, wrong dimensions, unknown names.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical-domain failure: the inputs are well-formed but the mathematics is
/// undefined or unstable at the requested point.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Input matrix is not self-adjoint, not unit trace, or has a negative eigenvalue.
class ValidationError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Matrix function evaluated outside its domain (e.g. log of a zero eigenvalue).
class BoundaryDomainError : public NumericError {
public:
    BoundaryDomainError(const std::string& what, double eigenvalue)
        : NumericError(what), eigenvalue_(eigenvalue) {}
    double eigenvalue() const noexcept { return eigenvalue_; }

private:
    double eigenvalue_;
};

/// The Lyapunov system for the symmetric logarithmic derivative is near-singular:
/// the state is too close to the boundary of the full-rank region.
class NearSingularError : public NumericError {
public:
    NearSingularError(const std::string& what, double min_pair_sum)
        : NumericError(what), min_pair_sum_(min_pair_sum) {}
    double min_pair_sum() const noexcept { return min_pair_sum_; }

private:
    double min_pair_sum_;
};

/// Intensive parameter outside the representable range of exp().
class ParameterRangeError : public NumericError {
public:
    using NumericError::NumericError;
};

class EigenSolverError : public NumericError {
public:
    EigenSolverError(const std::string& what, int dim, double condition_estimate)
        : NumericError(what), dim_(dim), condition_estimate_(condition_estimate) {}
    int dim() const noexcept { return dim_; }
    double condition_estimate() const noexcept { return condition_estimate_; }

private:
    int dim_;
    double condition_estimate_;
};

/// Expression evaluated outside the domain of one of its nodes.
class ExprDomainError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Expression text that cannot be parsed. `offset` is the byte offset of the failure.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : ConfigError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// A metric that must be Riemannian on the requested directions is not.
class SignatureError : public NumericError {
public:
    using NumericError::NumericError;
};

/// A scalar metric coefficient that must be bounded away from zero is not.
class DegenerateMetricError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace qtgeom
