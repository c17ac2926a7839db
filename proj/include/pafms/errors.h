#ifndef PAFMS_ERRORS_H
#define PAFMS_ERRORS_H

#include <stdexcept>
#include <string>

namespace pafms
{

/// Input data violates the cohort format or its invariants.
class DataError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A row-level parse failure. `row` is the 1-based line number in the source.
class ParseError : public DataError
{
public:
    ParseError(std::size_t row, const std::string& what)
        : DataError("row " + std::to_string(row) + ": " + what)
        , m_row(row)
    {
    }
    std::size_t row() const
    {
        return m_row;
    }

private:
    std::size_t m_row;
};

/// An estimator or fit could not produce a finite answer (separation,
/// non-convergence, zero weights, quadrature failure).
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed arguments that are inconsistent with an operation's preconditions.
class UsageError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace pafms

#endif
