#pragma once

#include <stdexcept>
#include <string>

namespace sa2d {

enum class ErrorKind {
    MissingFile,
    SchemaError,
    DuplicateId,
    InsufficientVideos,
    VideoTooShort,
    InvalidAnomalyWindow,
    IoError,
    InvalidConfig,
    ShapeMismatch,
    TooSmallForScales,
    InsufficientScenarios,
    InsufficientBlocks,
    EmptyTaskSet,
    EmptyInput,
    DegenerateLabels,
    NoEvaluableVideos,
    NoPositives,
    NoNegatives,
    UnknownVideoId,
    SupervisionViolation,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingFile: return "MissingFile";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::InsufficientVideos: return "InsufficientVideos";
        case ErrorKind::VideoTooShort: return "VideoTooShort";
        case ErrorKind::InvalidAnomalyWindow: return "InvalidAnomalyWindow";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::TooSmallForScales: return "TooSmallForScales";
        case ErrorKind::InsufficientScenarios: return "InsufficientScenarios";
        case ErrorKind::InsufficientBlocks: return "InsufficientBlocks";
        case ErrorKind::EmptyTaskSet: return "EmptyTaskSet";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::DegenerateLabels: return "DegenerateLabels";
        case ErrorKind::NoEvaluableVideos: return "NoEvaluableVideos";
        case ErrorKind::NoPositives: return "NoPositives";
        case ErrorKind::NoNegatives: return "NoNegatives";
        case ErrorKind::UnknownVideoId: return "UnknownVideoId";
        case ErrorKind::SupervisionViolation: return "SupervisionViolation";
    }
    return "Error";
}

}  // namespace sa2d
