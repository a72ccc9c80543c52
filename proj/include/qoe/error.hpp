#pragma once

#include <stdexcept>
#include <string>

namespace qoe {

/// Domain error carrying a stable kebab-case code (e.g. "score-out-of-range")
/// and a human-readable detail. Codes are part of the wire contract of the
/// session service and the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)), detail_(detail) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string code_;
  std::string detail_;
};

}  // namespace qoe
