#pragma once

#include <stdexcept>
#include <string>

namespace gds {

enum class ErrorCode {
    DimensionMismatch,
    DegreeOverflow,
    ZeroEntry,
    RankMismatch,
    SingularMatrix,
    BadSet,
    DegenerateKernel,
    WrongBranch,
    SelfCheckFailure,
    InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace gds
