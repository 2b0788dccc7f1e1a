#pragma once

#include <stdexcept>
#include <string>

namespace expander {

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// All singular values of a matrix fell below the rank cutoff.
class ZeroMatrix : public Error
{
public:
    using Error::Error;
};

/// X^T V is rank deficient, so some target direction is orthogonal to V.
class DegenerateIntersection : public Error
{
public:
    using Error::Error;
};

/// X^T V vanishes identically.
class ZeroProjection : public Error
{
public:
    using Error::Error;
};

class InvalidModel : public Error
{
public:
    using Error::Error;
};

/// lambda_d == lambda_{d+1} (or an analogous degenerate gap).
class NoSpectralGap : public Error
{
public:
    using Error::Error;
};

/// A rank condition that holds with probability one failed for this instance.
class GenericityFailure : public Error
{
public:
    using Error::Error;
};

/// A filter polynomial vanishes at one of the target eigenvalues.
class SingularFilter : public Error
{
public:
    using Error::Error;
};

/// An expansion step failed; the message carries the iteration index.
class StepFailure : public Error
{
public:
    StepFailure(int t, const std::string& what) :
        Error("step t=" + std::to_string(t) + ": " + what), m_t(t)
    {}

    int iteration() const noexcept { return m_t; }

private:
    int m_t;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

}  // namespace expander
