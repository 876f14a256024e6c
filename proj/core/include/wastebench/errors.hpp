#pragma once

#include <stdexcept>
#include <string>

namespace wastebench {

// Every failure the harness can report. Codes are a stable contract: tests
// match on them and the CLI maps them to exit codes.
enum class ErrorCode {
    // dataset manifests
    MissingFile,
    SchemaViolation,
    DuplicateId,
    UnknownId,
    StaleCorrection,
    EmptyManifest,
    MissingImageFile,
    IOFailure,
    // image pipeline
    UndecodableImage,
    InvalidCropWindow,
    EmptyClass,
    // models
    UnknownArchitecture,
    WeightsUnavailable,
    PrefixOutOfRange,
    ShapeMismatch,
    // training
    LabelOutOfRange,
    UnknownOptimizer,
    MissingHyperparam,
    DivergedTraining,
    EmptyDataset,
    // metrics
    MissingLabel,
    EmptyCounts,
    ZeroSupport,
    DegenerateLabels,
    UnknownModelName,
    // prediction files / fusion
    MalformedRow,
    NormalizationViolation,
    FilenameMismatch,
    LabelConflict,
    // configuration
    InvalidConfig,
};

const char* error_code_name(ErrorCode code);

// Process exit-code classes used by the CLI: 1 = IO, 2 = validation,
// 3 = training divergence.
int error_exit_code(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::StaleCorrection: return "StaleCorrection";
        case ErrorCode::EmptyManifest: return "EmptyManifest";
        case ErrorCode::MissingImageFile: return "MissingImageFile";
        case ErrorCode::IOFailure: return "IOFailure";
        case ErrorCode::UndecodableImage: return "UndecodableImage";
        case ErrorCode::InvalidCropWindow: return "InvalidCropWindow";
        case ErrorCode::EmptyClass: return "EmptyClass";
        case ErrorCode::UnknownArchitecture: return "UnknownArchitecture";
        case ErrorCode::WeightsUnavailable: return "WeightsUnavailable";
        case ErrorCode::PrefixOutOfRange: return "PrefixOutOfRange";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::UnknownOptimizer: return "UnknownOptimizer";
        case ErrorCode::MissingHyperparam: return "MissingHyperparam";
        case ErrorCode::DivergedTraining: return "DivergedTraining";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::MissingLabel: return "MissingLabel";
        case ErrorCode::EmptyCounts: return "EmptyCounts";
        case ErrorCode::ZeroSupport: return "ZeroSupport";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::UnknownModelName: return "UnknownModelName";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::NormalizationViolation: return "NormalizationViolation";
        case ErrorCode::FilenameMismatch: return "FilenameMismatch";
        case ErrorCode::LabelConflict: return "LabelConflict";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "UnknownError";
}

inline int error_exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile:
        case ErrorCode::MissingImageFile:
        case ErrorCode::IOFailure:
            return 1;
        case ErrorCode::DivergedTraining:
            return 3;
        default:
            return 2;
    }
}

}  // namespace wastebench
