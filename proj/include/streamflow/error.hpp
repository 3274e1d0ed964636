#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace streamflow {

enum class ErrorKind {
  Config,
  Input,
  Invariant,
  Numerical,
  Format,
  Io,
  BoundaryProbe,
  TrainingDiverged,
  Timeout,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace streamflow
