#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace threadscope {

enum class ErrorKind {
    Io,
    Schema,
    InvalidArgument,
    EmptyInput,
    Degenerate,       // zero variance, p_e = 1, no tokens
    DimensionMismatch,
    Provider,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace threadscope
