#pragma once

#include <stdexcept>
#include <string>

namespace polmc {

/// Rejected input: bad arguments, invalid configuration, malformed files.
class ValidationError : public std::invalid_argument {
public:
  explicit ValidationError(const std::string &what) : std::invalid_argument(what) {}
};

/// Failure while doing work on valid input (numerical breakdown, I/O, divergence).
class RuntimeError : public std::runtime_error {
public:
  explicit RuntimeError(const std::string &what) : std::runtime_error(what) {}
};

/// Corrupt or unsupported binary file; carries the byte offset of the problem.
class FormatError : public ValidationError {
public:
  FormatError(const std::string &what, std::size_t offset)
      : ValidationError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

} // namespace polmc
