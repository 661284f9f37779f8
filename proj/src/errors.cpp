// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/errors.hpp"

namespace sgad {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyCaption: return "EmptyCaption";
    case ErrorCode::TooLong: return "TooLong";
    case ErrorCode::GrammarError: return "GrammarError";
    case ErrorCode::UnknownRelation: return "UnknownRelation";
    case ErrorCode::IndexMismatch: return "IndexMismatch";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidSize: return "InvalidSize";
    case ErrorCode::TripletIndexOutOfRange: return "TripletIndexOutOfRange";
    case ErrorCode::EmptyPhrase: return "EmptyPhrase";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::MissingDataset: return "MissingDataset";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::FullyMaskedRow: return "FullyMaskedRow";
    case ErrorCode::BackwardOnNonScalar: return "BackwardOnNonScalar";
    case ErrorCode::MissingMap: return "MissingMap";
    case ErrorCode::MaskMismatch: return "MaskMismatch";
    case ErrorCode::SamplingExhausted: return "SamplingExhausted";
    case ErrorCode::OutOfCanvas: return "OutOfCanvas";
    case ErrorCode::CheckpointVersionMismatch: return "CheckpointVersionMismatch";
  }
  return "UnknownError";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::EmptyCaption:
    case ErrorCode::TooLong:
    case ErrorCode::GrammarError:
    case ErrorCode::UnknownRelation:
    case ErrorCode::IndexMismatch:
    case ErrorCode::MissingField:
    case ErrorCode::InvalidSize:
    case ErrorCode::TripletIndexOutOfRange:
    case ErrorCode::EmptyPhrase:
    case ErrorCode::StepOutOfRange:
      return 1;
    case ErrorCode::MissingDataset:
    case ErrorCode::MissingCheckpoint:
    case ErrorCode::MissingReference:
    case ErrorCode::IoError:
    case ErrorCode::CheckpointVersionMismatch:
      return 2;
    default:
      return 3;
  }
}

}  // namespace sgad
