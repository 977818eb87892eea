#pragma once

#include <stdexcept>
#include <string>

namespace streamdec {

enum class Errc {
  // core
  NonDivisible,
  ZeroLength,
  EmptyPrompt,
  BlockOutOfRange,
  PositionOutOfRange,
  InvalidVocab,
  SlotRecommit,
  // denoisers
  QueryNotInView,
  VocabMismatch,
  MalformedScript,
  OddEmbedDim,
  // pruner
  InconsistentIndexSet,
  BlockRegression,
  // scheduler
  ParamOutOfRange,
  EmptyPredictions,
  BlockAlreadyDone,
  ConfigInvalid,
  UnknownKind,
  // metrics
  InvalidCounts,
  EmptyRun,
  DivideByZero,
  EmptyTrace,
  NoAttentionData,
  // experiment runner
  IncomparableBundles,
  EmptyBundle,
  IoError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::NonDivisible: return "NonDivisible";
    case Errc::ZeroLength: return "ZeroLength";
    case Errc::EmptyPrompt: return "EmptyPrompt";
    case Errc::BlockOutOfRange: return "BlockOutOfRange";
    case Errc::PositionOutOfRange: return "PositionOutOfRange";
    case Errc::InvalidVocab: return "InvalidVocab";
    case Errc::SlotRecommit: return "SlotRecommit";
    case Errc::QueryNotInView: return "QueryNotInView";
    case Errc::VocabMismatch: return "VocabMismatch";
    case Errc::MalformedScript: return "MalformedScript";
    case Errc::OddEmbedDim: return "OddEmbedDim";
    case Errc::InconsistentIndexSet: return "InconsistentIndexSet";
    case Errc::BlockRegression: return "BlockRegression";
    case Errc::ParamOutOfRange: return "ParamOutOfRange";
    case Errc::EmptyPredictions: return "EmptyPredictions";
    case Errc::BlockAlreadyDone: return "BlockAlreadyDone";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::InvalidCounts: return "InvalidCounts";
    case Errc::EmptyRun: return "EmptyRun";
    case Errc::DivideByZero: return "DivideByZero";
    case Errc::EmptyTrace: return "EmptyTrace";
    case Errc::NoAttentionData: return "NoAttentionData";
    case Errc::IncomparableBundles: return "IncomparableBundles";
    case Errc::EmptyBundle: return "EmptyBundle";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace streamdec
