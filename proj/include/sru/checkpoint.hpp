// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Checkpoint container: a UTF-8 JSON header (format version, model spec,
// layer configs, dtype, rng seed, step) followed by raw little-endian f64
// tensors in declaration order, each preceded by a 32-bit length-prefixed
// name and an 8-byte element count. save -> load -> save is byte-identical.

#pragma once

#include <string>
#include <variant>

#include "sru/train.hpp"

namespace sru {

struct CheckpointError : std::runtime_error {
  enum class Kind { io, parse, version, truncated, shape };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
};

constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::string& path, SruLmSession& session,
                     uint64_t seed);
void save_checkpoint(const std::string& path, LstmLmSession& session,
                     uint64_t seed);

struct LoadedCheckpoint {
  uint64_t seed = 0;
  int64_t step = 0;
  ModelKind kind = ModelKind::char_lm;
  std::variant<SruLmSession, LstmLmSession> session;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Human-readable header + tensor table.
std::string inspect_checkpoint(const std::string& path);

}  // namespace sru
