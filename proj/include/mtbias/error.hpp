#pragma once

#include <stdexcept>
#include <string>

namespace mtbias {

class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an input file does not match its documented schema.
// The CLI maps this to exit code 2.
class schema_error : public error {
 public:
  explicit schema_error(const std::string& what) : error(what) {}
};

}  // namespace mtbias
