#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gwselect {

enum class ErrorKind {
    format,
    validation,
    io,
    shape,
    degenerate,
    pairing,
    size,
    input,
    guard,
    parameter,
    alignment,
    pool,
    rank,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::format: return "format error";
        case ErrorKind::validation: return "validation error";
        case ErrorKind::io: return "I/O error";
        case ErrorKind::shape: return "shape error";
        case ErrorKind::degenerate: return "degenerate input";
        case ErrorKind::pairing: return "pairing error";
        case ErrorKind::size: return "size error";
        case ErrorKind::input: return "input error";
        case ErrorKind::guard: return "guard error";
        case ErrorKind::parameter: return "parameter error";
        case ErrorKind::alignment: return "alignment error";
        case ErrorKind::pool: return "pool error";
        case ErrorKind::rank: return "rank error";
    }
    return "error";
}

// Every error raised by the library for bad inputs. Anything else escaping
// a call is a bug.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace gwselect
