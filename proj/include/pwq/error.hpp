#pragma once

#include <stdexcept>
#include <string>

namespace pwq {

// Every failure carries a short machine-readable code ("point-not-in-X",
// "too-large", ...) in addition to the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

inline void require(bool ok, const char* code, const std::string& message) {
  if (!ok) throw Error(code, message);
}

}  // namespace pwq
