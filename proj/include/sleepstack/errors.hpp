#pragma once

#include <stdexcept>
#include <string>

namespace sleepstack {

enum class ErrorCode {
    MalformedFile,
    RangeViolation,
    LabelMismatch,
    EmptyWindow,
    InsufficientBeats,
    InsufficientHistory,
    DegenerateFeature,
    DimensionMismatch,
    NonFiniteLoss,
    EmptyDataset,
    BadMagic,
    ChecksumMismatch,
    TopologyMismatch,
    FoldTooSmall,
    LengthMismatch,
    EmptyInput,
    InsufficientData,
    BadModel,
    IoError,
    ArenaTooSmall,
    UsageError,
};

const char* error_code_name(ErrorCode code);

/// Broad category used for CLI exit codes: usage=2, data=3, gate=1.
enum class ErrorCategory { Usage, Data, Gate };

ErrorCategory error_category(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }
    const char* code_name() const { return error_code_name(code_); }

private:
    ErrorCode code_;
};

} // namespace sleepstack
