#pragma once
#include <stdexcept>
#include <string>

namespace kep {

/// Input outside the mathematical domain of an operation (non-finite
/// values, negative magnitudes, invalid hyperparameters).
class domain_error : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

/// A penalty was used outside the regime an algorithm requires,
/// e.g. eta * alpha >= 1 for coordinate descent on KEP or MCP.
class regime_error : public domain_error
{
public:
    using domain_error::domain_error;
};

/// Violated structural precondition (dimension mismatch, unstandardized
/// design, degenerate column, malformed grid).
class precondition_error : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure inside a numerical kernel (singular system, arccos argument
/// far outside [-1, 1]).
class numerical_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw precondition_error(msg);
}

} // namespace detail
} // namespace kep
