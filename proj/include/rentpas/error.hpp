#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rentpas {

// Every failure the library reports carries one of these names; the CLI
// and HTTP layers surface the name verbatim.
enum class ErrorKind {
  NonNumericPrice,
  NonPositivePrice,
  UnparseableDetails,
  FileUnreadable,
  MissingColumns,
  MalformedCsv,
  EmptyDataset,
  WidthMismatch,
  SingularSystem,
  InvalidSpec,
  LengthMismatch,
  ZeroVarianceTruth,
  BadK,
  EmptyGrid,
  ZeroSigma,
  TooFewRecords,
  NonPositiveQ,
  UnknownListing,
  ZeroPasExemplar,
  EmptyRecords,
  DegenerateMatrix,
  PreconditionFailed,
  SnapshotMismatch,
  MalformedSnapshot,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonNumericPrice: return "NonNumericPrice";
    case ErrorKind::NonPositivePrice: return "NonPositivePrice";
    case ErrorKind::UnparseableDetails: return "UnparseableDetails";
    case ErrorKind::FileUnreadable: return "FileUnreadable";
    case ErrorKind::MissingColumns: return "MissingColumns";
    case ErrorKind::MalformedCsv: return "MalformedCsv";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::WidthMismatch: return "WidthMismatch";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ZeroVarianceTruth: return "ZeroVarianceTruth";
    case ErrorKind::BadK: return "BadK";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::ZeroSigma: return "ZeroSigma";
    case ErrorKind::TooFewRecords: return "TooFewRecords";
    case ErrorKind::NonPositiveQ: return "NonPositiveQ";
    case ErrorKind::UnknownListing: return "UnknownListing";
    case ErrorKind::ZeroPasExemplar: return "ZeroPasExemplar";
    case ErrorKind::EmptyRecords: return "EmptyRecords";
    case ErrorKind::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorKind::PreconditionFailed: return "PreconditionFailed";
    case ErrorKind::SnapshotMismatch: return "SnapshotMismatch";
    case ErrorKind::MalformedSnapshot: return "MalformedSnapshot";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return to_string(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace rentpas
