#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace outfit {

enum class ErrorKind {
  kUsage,
  kConfig,
  kDatasetFormat,
  kIntegrity,
  kVocabulary,
  kSamplingExhausted,
  kShape,
  kNumeric,
  kInvalidQuery,
  kPool,
  kModality,
  kUndefinedCorrelation,
  kNotFound,
  kConflict,
  kIo,
};

/// Stable machine-readable name, used in CLI and HTTP error bodies.
std::string_view error_code(ErrorKind kind);

/// Process exit code for a failure of this kind: 2 usage, 3 data, 4 numeric.
int exit_code(ErrorKind kind);

/// The single exception type thrown by the library. `details` carries the
/// offending identifiers (item ids, type names, file names) when there are any.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(message), kind_(kind), details_(std::move(details)) {}

  ErrorKind kind() const { return kind_; }
  const std::vector<std::string>& details() const { return details_; }

 private:
  ErrorKind kind_;
  std::vector<std::string> details_;
};

inline std::string_view error_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kDatasetFormat: return "dataset_format";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kVocabulary: return "vocabulary";
    case ErrorKind::kSamplingExhausted: return "sampling_exhausted";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kInvalidQuery: return "invalid_query";
    case ErrorKind::kPool: return "pool";
    case ErrorKind::kModality: return "modality";
    case ErrorKind::kUndefinedCorrelation: return "undefined_correlation";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidQuery:
      return 2;
    case ErrorKind::kShape:
    case ErrorKind::kNumeric:
    case ErrorKind::kUndefinedCorrelation:
      return 4;
    default:
      return 3;
  }
}

}  // namespace outfit
