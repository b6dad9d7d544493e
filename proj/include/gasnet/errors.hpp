#pragma once

#include <stdexcept>
#include <string>

namespace gasnet {

/// Malformed input text (CSV syntax, bad numbers); carries line/column.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string msg, int line = 0, int column = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) +
                                            (column > 0 ? ":" + std::to_string(column) : "") +
                                            ": " + msg
                                      : msg),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_ = 0;
    int column_ = 0;
};

/// Structurally well-formed input that violates a model invariant
/// (nonpositive diameter, disconnected graph, overlapping ports, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runtime numerical failure (pressure underflow, singular system,
/// Newton stagnation, step-size underflow).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gasnet
