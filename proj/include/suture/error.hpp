#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace suture {

/// Bad input: violated precondition, malformed config, invalid manifest.
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while doing the work (I/O, sampling exhaustion, numerical breakdown).
/// The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public RuntimeFailure {
 public:
  IoError(const std::string& what, const std::filesystem::path& path)
      : RuntimeFailure(what + ": " + path.string()), path_(path) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace suture
