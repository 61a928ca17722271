#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spdagg {

// Violated precondition: wrong shapes, out-of-range labels, non-finite input.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Rank-deficient argument to a factorization.
class SingularError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed FTS / checkpoint bytes. offset() is the byte position the
// reader was validating when it gave up.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace spdagg
