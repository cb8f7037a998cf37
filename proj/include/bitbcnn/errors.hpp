#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bitbcnn {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size disagreement between tensors.
struct DimensionError : Error {
    using Error::Error;
};

// Malformed textual input; `offset` is the byte position of the problem.
struct ParseError : Error {
    std::size_t offset;
    ParseError(const std::string& message, std::size_t byte_offset)
        : Error(message + " (byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
};

// Violation of a user-facing contract (bad flag combination, mismatched
// languages, missing label). The CLI maps these to exit code 2.
struct UsageError : Error {
    using Error::Error;
};

}  // namespace bitbcnn
