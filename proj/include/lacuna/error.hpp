#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lacuna {

enum class ErrorCode {
  UnbalancedBrackets,
  MixedBracketContent,
  EmptyBrackets,
  EmptyCorpus,
  EmptySequence,
  IndexOutOfVocab,
  LengthMismatch,
  NoMaskedPositions,
  DivergedLoss,
  NoGapPresent,
  UnknownCharacter,
  MixedCandidateLengths,
  NoCandidates,
  DuplicateCandidate,
  ContainsBlankLacuna,
  EmptyTestSet,
  BadCheckpoint,
  VocabMismatch,
  BadFormat,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorCode::MixedBracketContent: return "MixedBracketContent";
    case ErrorCode::EmptyBrackets: return "EmptyBrackets";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::IndexOutOfVocab: return "IndexOutOfVocab";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoMaskedPositions: return "NoMaskedPositions";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::NoGapPresent: return "NoGapPresent";
    case ErrorCode::UnknownCharacter: return "UnknownCharacter";
    case ErrorCode::MixedCandidateLengths: return "MixedCandidateLengths";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::DuplicateCandidate: return "DuplicateCandidate";
    case ErrorCode::ContainsBlankLacuna: return "ContainsBlankLacuna";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::VocabMismatch: return "VocabMismatch";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI and the HTTP service can map it onto exit codes / status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// CLI exit status for an error: 2 input, 3 training, 4 query validation.
constexpr int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::DivergedLoss:
      return 3;
    case ErrorCode::NoGapPresent:
    case ErrorCode::UnknownCharacter:
    case ErrorCode::MixedCandidateLengths:
    case ErrorCode::NoCandidates:
    case ErrorCode::DuplicateCandidate:
    case ErrorCode::LengthMismatch:
      return 4;
    default:
      return 2;
  }
}

}  // namespace lacuna
