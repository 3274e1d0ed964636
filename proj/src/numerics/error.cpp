#include "streamflow/error.hpp"

namespace streamflow {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "configuration";
    case ErrorKind::Input: return "input";
    case ErrorKind::Invariant: return "invariant";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::BoundaryProbe: return "boundary-probe";
    case ErrorKind::TrainingDiverged: return "training-diverged";
    case ErrorKind::Timeout: return "timeout";
  }
  return "unknown";
}

}  // namespace streamflow
