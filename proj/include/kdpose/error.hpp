#pragma once

#include <stdexcept>
#include <string>

namespace kdpose {

/// Error categories surfaced across the C API boundary as status codes.
enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    insufficient_data,
    no_convergence,
    behind_camera,
    degenerate_geometry,
    numeric,
    io,
    parse,
    incompatible,
    internal,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::no_convergence: return "no_convergence";
    case ErrorCode::behind_camera: return "behind_camera";
    case ErrorCode::degenerate_geometry: return "degenerate_geometry";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::incompatible: return "incompatible";
    case ErrorCode::internal: return "internal";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) raise(code, message);
}

} // namespace kdpose
