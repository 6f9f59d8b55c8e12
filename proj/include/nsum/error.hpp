#pragma once

#include <stdexcept>
#include <string>

namespace nsum {

enum class ErrorCode {
    Io,
    Parse,
    MissingColumn,
    MissingValue,
    NonIntegerCount,
    NonpositiveWeight,
    UnknownGroup,
    DuplicateId,
    VisibilityExceedsTies,
    EmptySample,
    InvalidRegistry,
    InvalidConfig,
    InfeasibleMembership,
    DegenerateDenominator,
    DegenerateVisibility,
    SingletonStratum,
    EmptyGroup,
    InsufficientReplicates,
    LengthMismatch,
    InvalidArgument,
    TooManyDegenerateReplicates,
    Internal,
};

inline const char* code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::Io: return "Io";
        case ErrorCode::Parse: return "Parse";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::MissingValue: return "MissingValue";
        case ErrorCode::NonIntegerCount: return "NonIntegerCount";
        case ErrorCode::NonpositiveWeight: return "NonpositiveWeight";
        case ErrorCode::UnknownGroup: return "UnknownGroup";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::VisibilityExceedsTies: return "VisibilityExceedsTies";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::InvalidRegistry: return "InvalidRegistry";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InfeasibleMembership: return "InfeasibleMembership";
        case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorCode::DegenerateVisibility: return "DegenerateVisibility";
        case ErrorCode::SingletonStratum: return "SingletonStratum";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::InsufficientReplicates: return "InsufficientReplicates";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::TooManyDegenerateReplicates: return "TooManyDegenerateReplicates";
        case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

// what() reads like "NonpositiveWeight(r7): weight 0"
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(code_name(code)) + (detail.empty() ? "" : ": " + detail)), code_(code) {}
    Error(ErrorCode code, const std::string& where, const std::string& detail)
        : std::runtime_error(std::string(code_name(code)) + "(" + where + ")" + (detail.empty() ? "" : ": " + detail)),
          code_(code) {}

    ErrorCode code() const { return code_; }
    // bad input rather than a bug; the CLI maps this to exit status 2
    bool is_validation() const { return code_ != ErrorCode::Internal; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& detail) { throw Error(c, detail); }

}  // namespace nsum
