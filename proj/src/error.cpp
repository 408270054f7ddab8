#include "fieldpod/error.hpp"

namespace fieldpod {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Configuration: return "configuration_error";
    case ErrorCode::Validation: return "validation_error";
    case ErrorCode::ModeViolation: return "config_window_closed";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Range: return "range_error";
    case ErrorCode::MissingData: return "missing_data";
    case ErrorCode::Precondition: return "precondition_violation";
    case ErrorCode::Storage: return "storage_error";
    case ErrorCode::Transport: return "transport_error";
    case ErrorCode::Parse: return "parse_error";
  }
  return "unknown";
}

}  // namespace fieldpod
