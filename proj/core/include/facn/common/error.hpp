#pragma once

#include <stdexcept>
#include <string>

namespace facn {

// Precondition violations use std::invalid_argument; the types below cover
// failures that callers (mostly the CLI) want to tell apart.

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace facn
