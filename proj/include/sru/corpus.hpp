// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Byte-level corpus handling for the char LM: positional 90/5/5
// train/valid/test split, with the vocabulary built from the training
// split only. Symbols first seen outside the training split map to UNK.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sru/common.hpp"

namespace sru {

struct CharCorpus {
  std::vector<int32_t> train_ids, valid_ids, test_ids;
  std::array<int32_t, 256> byte_to_id;  // UNK for bytes absent from train
  std::vector<uint8_t> id_to_byte;      // training-split symbols, by id
  int32_t unk_id = 0;
  int64_t vocab_size = 0;  // distinct training bytes + 1 (UNK)
};

CharCorpus corpus_from_bytes(const std::vector<uint8_t>& bytes);

// Reads the file as raw bytes; empty or unreadable files are IngestErrors.
CharCorpus load_corpus(const std::string& path);

}  // namespace sru
