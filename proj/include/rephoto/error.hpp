#pragma once

#include <stdexcept>
#include <string>

namespace rephoto {

/// Bad user input: malformed files, failed validation, out-of-range flags.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File system or codec failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A postcondition the toolkit itself should have guaranteed did not hold.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace exit_code {
inline constexpr int success = 0;
inline constexpr int validation = 2;
inline constexpr int io = 3;
inline constexpr int invariant = 4;
}  // namespace exit_code

}  // namespace rephoto
