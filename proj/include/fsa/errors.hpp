#pragma once

#include <stdexcept>
#include <string>

namespace fsa {

/// Bad caller-supplied argument (ranges, options, mismatched shapes).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tensor extents that do not compose.
class ShapeError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

/// NaN or infinity where a finite value is required.
class InvalidValueError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed serialized data (weight files).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wrong magic number or header layout in a dataset file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Files that are individually valid but disagree with each other.
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fsa
