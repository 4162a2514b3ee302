#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace affield {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched dimensions between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A precondition on argument values was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A fitting problem has no unique solution (too few or collinear points).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Allocation refused because it would exceed a configured byte budget.
class BudgetError : public Error {
public:
    using Error::Error;
};

/// Training could not proceed (no usable data, NaN loss, ...).
class TrainingError : public Error {
public:
    using Error::Error;
};

enum class ParseErrorKind { BadMagic, Truncated, DimensionOverflow, Malformed, Io };

class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, const std::string& what, std::size_t offset = 0)
        : Error(what), kind_(kind), offset_(offset) {}

    ParseErrorKind kind() const noexcept { return kind_; }
    /// Byte offset in the input at which the problem was detected.
    std::size_t offset() const noexcept { return offset_; }

private:
    ParseErrorKind kind_;
    std::size_t offset_;
};

}  // namespace affield
