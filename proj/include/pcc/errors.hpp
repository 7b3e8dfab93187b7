#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcc {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dimension mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Parameter outside its admissible range (labels, alpha, component counts).
class DomainError : public Error {
public:
    using Error::Error;
};

// Data-dependent requirement not met (empty dataset, class too small, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Malformed input file; message carries the offending location.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Iterative solver exceeded its sweep budget.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::size_t index)
        : Error(what), stalled_index_(index) {}

    // Index of the eigenvalue that failed to settle.
    std::size_t stalled_index() const noexcept { return stalled_index_; }

private:
    std::size_t stalled_index_;
};

}  // namespace pcc
