#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace densum {

/// Design matrix lacks full column rank; `column()` is the 0-based offending column.
class RankDeficientError : public std::runtime_error {
public:
    RankDeficientError(std::size_t column, const std::string& what)
        : std::runtime_error(what), column_(column) {}
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

/// An iterative routine exhausted its iteration budget.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky factorization met a non-positive pivot.
class NotPositiveDefiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input; `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace densum
