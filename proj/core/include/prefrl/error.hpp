#pragma once

#include <stdexcept>
#include <string>

namespace prefrl {

// Single error type for contract violations and IO failures. Messages name
// the operation and the offending values so callers can report them as-is.
class Error : public std::runtime_error {
 public:
  explicit Error(std::string msg) : std::runtime_error(std::move(msg)) {}
};

[[noreturn]] inline void fail(std::string msg) { throw Error(std::move(msg)); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace prefrl
