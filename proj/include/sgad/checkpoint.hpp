// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace sgad {

// Versioned binary container: magic "SGAD", u32 format version, then a table
// of (name path, shape, little-endian f64 data) entries. Hyperparameters live
// in a JSON sidecar at <path>.json.
struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

constexpr uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path,
                      const std::vector<CheckpointEntry>& entries,
                      const nlohmann::json& sidecar);

struct Checkpoint {
  std::vector<CheckpointEntry> entries;
  nlohmann::json sidecar;

  const CheckpointEntry* find(const std::string& name) const;
};

Checkpoint read_checkpoint(const std::string& path);

bool file_exists(const std::string& path);

}  // namespace sgad
