#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pathbench {

enum class ErrorKind {
    InvalidArgument,
    ParseError,
    DuplicateId,
    EmptyManifest,
    MissingFile,
    IoError,
    FormatError,
    ShapeError,
    InvalidData,
    DegenerateLabels,
    MissingLabel,
    BackendUnavailable,
    IncompletePredictions,
    UnknownPatch,
    EmptyEvaluation,
    ZeroClassSize,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::EmptyManifest: return "EmptyManifest";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::InvalidData: return "InvalidData";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::MissingLabel: return "MissingLabel";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::IncompletePredictions: return "IncompletePredictions";
    case ErrorKind::UnknownPatch: return "UnknownPatch";
    case ErrorKind::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::ZeroClassSize: return "ZeroClassSize";
    }
    return "Unknown";
}

/// Every failure raised by the library. `what()` is prefixed with the kind
/// name so diagnostics can be matched by scripts.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace pathbench
