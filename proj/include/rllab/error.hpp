#ifndef RLLAB_ERROR_HPP
#define RLLAB_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rllab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

// Raised when an operation's documented precondition does not hold.
struct PreconditionError : Error {
    using Error::Error;
};

struct EvalError : Error {
    using Error::Error;
};

struct SearchError : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& what, std::size_t pos)
        : Error(what + " at position " + std::to_string(pos)), position(pos) {}
    std::size_t position;
};

inline void require_dim(std::size_t got, std::size_t want, const char* where) {
    if (got != want) {
        throw DimensionError(std::string(where) + ": dimension mismatch (" + std::to_string(got) +
                             " vs " + std::to_string(want) + ")");
    }
}

} // namespace rllab

#endif
