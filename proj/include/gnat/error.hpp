#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gnat {

enum class ErrorCode {
  kIo,
  kDecode,
  kEmptyDocument,
  kInsufficientText,
  kInvalidArgument,
  kDimensionMismatch,
  kDegenerateEmbedding,
  kMissingResource,
  kDegenerateBackground,
  kNonFiniteScore,
  kInsufficientNullSample,
  kNonConvergence,
  kDegenerateCorrelation,
  kFormat,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kDecode: return "DecodeError";
    case ErrorCode::kEmptyDocument: return "EmptyDocument";
    case ErrorCode::kInsufficientText: return "InsufficientText";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::kMissingResource: return "MissingResource";
    case ErrorCode::kDegenerateBackground: return "DegenerateBackground";
    case ErrorCode::kNonFiniteScore: return "NonFiniteScore";
    case ErrorCode::kInsufficientNullSample: return "InsufficientNullSample";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kDegenerateCorrelation: return "DegenerateCorrelation";
    case ErrorCode::kFormat: return "FormatError";
  }
  return "Error";
}

// All library failures are reported as gnat::Error; code() identifies the
// failure class, what() carries "<ClassName>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gnat
