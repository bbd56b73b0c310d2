#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gfm {

// Dimension or length mismatch between arguments.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite values or a numerically failed computation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures: unreadable, unwritable, or refusing to overwrite.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed on-disk data. `offset` is the byte position where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace gfm
