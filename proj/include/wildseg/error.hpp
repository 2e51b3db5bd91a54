#pragma once

#include <stdexcept>
#include <string>

namespace wildseg {

// Every failure the library reports carries a stable name (e.g. "NoFrames",
// "InconsistentDims") so callers and the CLI can branch on it without
// parsing messages.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& detail)
      : std::runtime_error(detail.empty() ? name : name + ": " + detail),
        name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

[[noreturn]] inline void fail(const char* name, const std::string& detail = {}) {
  throw Error(name, detail);
}

}  // namespace wildseg
