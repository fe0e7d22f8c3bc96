#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lmk {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed file content. `offset` is a byte offset for binary formats and
/// a 1-based line number for text formats (see `is_line`).
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset, bool is_line = false)
        : Error(what + (is_line ? " (line " : " (byte offset ") + std::to_string(offset) + ")"),
          offset_(offset), is_line_(is_line) {}

    std::size_t offset() const noexcept { return offset_; }
    bool is_line() const noexcept { return is_line_; }

private:
    std::size_t offset_;
    bool is_line_;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Affine transform whose linear block cannot be inverted.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// A numeric operation has no finite result for the given input, e.g. a
/// weighted mean over weights that are all zero. Carries the channel (landmark
/// class) index that failed when known, -1 otherwise.
class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& what, long channel = -1)
        : Error(what), channel_(channel) {}

    long channel() const noexcept { return channel_; }

private:
    long channel_;
};

}  // namespace lmk
