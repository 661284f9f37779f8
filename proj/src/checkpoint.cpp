// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sgad/errors.hpp"

namespace sgad {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'A', 'D'};

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(in.good(), ErrorCode::IoError, "truncated checkpoint");
  return v;
}

}  // namespace

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

void write_checkpoint(const std::string& path,
                      const std::vector<CheckpointEntry>& entries,
                      const nlohmann::json& sidecar) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write checkpoint " + path);
  out.write(kMagic, 4);
  write_pod<uint32_t>(out, kCheckpointVersion);
  write_pod<uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(e.shape.size()));
    int64_t numel = 1;
    for (int d : e.shape) {
      write_pod<int64_t>(out, d);
      numel *= d;
    }
    require(numel == static_cast<int64_t>(e.data.size()), ErrorCode::ShapeMismatch,
            "checkpoint entry " + e.name + " has inconsistent shape");
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  }
  require(out.good(), ErrorCode::IoError, "failed writing checkpoint " + path);
  out.close();

  std::ofstream side(path + ".json");
  require(side.good(), ErrorCode::IoError, "cannot write sidecar for " + path);
  side << sidecar.dump(2) << '\n';
  require(side.good(), ErrorCode::IoError, "failed writing sidecar for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  require(file_exists(path), ErrorCode::MissingCheckpoint,
          "checkpoint not found: " + path);
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0,
          ErrorCode::CheckpointVersionMismatch,
          path + " is not an SGAD checkpoint");
  uint32_t version = read_pod<uint32_t>(in);
  require(version == kCheckpointVersion, ErrorCode::CheckpointVersionMismatch,
          "checkpoint format version " + std::to_string(version) +
              " is not supported");
  Checkpoint ckpt;
  uint64_t count = read_pod<uint64_t>(in);
  for (uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    uint32_t name_len = read_pod<uint32_t>(in);
    e.name.resize(name_len);
    in.read(e.name.data(), name_len);
    uint32_t ndim = read_pod<uint32_t>(in);
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      int64_t dim = read_pod<int64_t>(in);
      e.shape.push_back(static_cast<int>(dim));
      numel *= dim;
    }
    e.data.resize(static_cast<size_t>(numel));
    in.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(e.data.size() * sizeof(double)));
    require(in.good(), ErrorCode::IoError, "truncated checkpoint " + path);
    ckpt.entries.push_back(std::move(e));
  }

  const std::string side_path = path + ".json";
  require(file_exists(side_path), ErrorCode::MissingCheckpoint,
          "checkpoint sidecar not found: " + side_path);
  std::ifstream side(side_path);
  try {
    side >> ckpt.sidecar;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoError, std::string("malformed sidecar: ") + e.what());
  }
  return ckpt;
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

}  // namespace sgad
