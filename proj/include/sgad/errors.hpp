// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sgad {

enum class ErrorCode {
  // usage / configuration
  InvalidConfig,
  EmptyCaption,
  TooLong,
  GrammarError,
  UnknownRelation,
  IndexMismatch,
  MissingField,
  InvalidSize,
  TripletIndexOutOfRange,
  EmptyPhrase,
  StepOutOfRange,
  // missing artifacts
  MissingDataset,
  MissingCheckpoint,
  MissingReference,
  IoError,
  // internal invariants
  ShapeMismatch,
  FullyMaskedRow,
  BackwardOnNonScalar,
  MissingMap,
  MaskMismatch,
  SamplingExhausted,
  OutOfCanvas,
  CheckpointVersionMismatch,
};

const char* error_code_name(ErrorCode code);

// Exit-code convention: 0 success, 1 usage/config error, 2 missing artifact,
// 3 internal invariant violation.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }
  int exit_code() const { return exit_code_for(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace sgad
