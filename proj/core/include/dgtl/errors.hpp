#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dgtl {

// Base of every error thrown by the library. kind() is a stable,
// machine-parsable class name; the CLI prints it in one-line error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

struct ValueError : Error {
  explicit ValueError(const std::string& m) : Error("value", m) {}
};

struct NonFiniteError : Error {
  explicit NonFiniteError(const std::string& m) : Error("nonfinite", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

struct CheckpointError : Error {
  explicit CheckpointError(const std::string& m) : Error("checkpoint", m) {}
};

}  // namespace dgtl
