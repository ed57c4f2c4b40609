#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace banet {

// Caller passed arguments that violate an operation's contract.
class usage_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Filesystem / serialization failure.
class io_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Dataset failed schema or invariant validation on load.
class load_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

template <typename... Args>
std::string str_cat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

} // namespace banet
