#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rodhom {

/// Machine-readable failure categories. The CLI maps these to exit codes and
/// to the `code` field of its error JSON.
enum class ErrorCode {
  invalid_parameter,
  format,
  mesh_invalid,
  mesh_not_found,
  consistency,
  convergence,
  unsupported_material,
  size,
  invalid_input,
  resolution,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::format: return "format";
    case ErrorCode::mesh_invalid: return "mesh-invalid";
    case ErrorCode::mesh_not_found: return "mesh-not-found";
    case ErrorCode::consistency: return "consistency";
    case ErrorCode::convergence: return "convergence";
    case ErrorCode::unsupported_material: return "unsupported-material";
    case ErrorCode::size: return "size";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::resolution: return "resolution";
  }
  return "unknown";
}

/// True for failures caused by the caller's input rather than by numerics.
inline bool is_input_error(ErrorCode code) {
  return code != ErrorCode::convergence && code != ErrorCode::consistency;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rodhom
