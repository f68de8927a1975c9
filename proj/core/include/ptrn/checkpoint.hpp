#pragma once

#include <string>

#include "ptrn/encoder.hpp"
#include "ptrn/errors.hpp"
#include "ptrn/vocab.hpp"

namespace ptrn {

// Model checkpoint, self-contained: config, vocabulary (with the word
// dictionary), encoder weights, and an optional classifier head.
//
// Binary layout, little-endian:
//   magic "PTRN" | version u32 | config block (6 x u32 + seed u64)
//   flags u32 (bit0 = classifier head present) | head_labels u32
//   vocab block: token_count u32, tokens (u16 len + bytes),
//                pad/cls/unk u32, dict_count u32, words (u16 len + bytes)
//   offset table: entry_count u32, per entry
//                 (u16 name len + name, rows u32, cols u32, offset u64)
//   weight blob: raw IEEE-754 doubles, row-major, in table order; offsets
//                index into this blob in bytes
struct Checkpoint {
  EncoderConfig config;
  EncoderParams params;
  Vocab vocab;
  bool has_head = false;
  int head_labels = 0;
  Mat head_w;  // d x labels
  Vec head_b;  // labels
};

inline constexpr uint32_t kCheckpointVersion = 1;

struct CorruptCheckpoint : StageError {
  explicit CorruptCheckpoint(const std::string& what) : StageError("checkpoint", what) {}
};
struct CheckpointVersionMismatch : StageError {
  explicit CheckpointVersionMismatch(const std::string& what) : StageError("checkpoint", what) {}
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const EncoderModel& model, const Vocab& vocab);

}  // namespace ptrn
