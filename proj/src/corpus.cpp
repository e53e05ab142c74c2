// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/corpus.hpp"

#include <fstream>

namespace sru {

CharCorpus corpus_from_bytes(const std::vector<uint8_t>& bytes) {
  if (bytes.empty()) throw IngestError("corpus: empty input");
  CharCorpus c;
  const int64_t n = static_cast<int64_t>(bytes.size());
  const int64_t n_train = n * 9 / 10;
  const int64_t n_valid = n / 20;
  if (n_train < 2) throw IngestError("corpus: too small to split");

  c.byte_to_id.fill(-1);
  for (int64_t i = 0; i < n_train; ++i) {
    const uint8_t b = bytes[static_cast<size_t>(i)];
    if (c.byte_to_id[b] < 0) {
      c.byte_to_id[b] = static_cast<int32_t>(c.id_to_byte.size());
      c.id_to_byte.push_back(b);
    }
  }
  c.unk_id = static_cast<int32_t>(c.id_to_byte.size());
  c.vocab_size = c.unk_id + 1;
  for (auto& id : c.byte_to_id) {
    if (id < 0) id = c.unk_id;
  }

  const auto map_range = [&](int64_t lo, int64_t hi) {
    std::vector<int32_t> ids;
    ids.reserve(static_cast<size_t>(hi - lo));
    for (int64_t i = lo; i < hi; ++i) ids.push_back(c.byte_to_id[bytes[static_cast<size_t>(i)]]);
    return ids;
  };
  c.train_ids = map_range(0, n_train);
  c.valid_ids = map_range(n_train, n_train + n_valid);
  c.test_ids = map_range(n_train + n_valid, n);
  return c;
}

CharCorpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("corpus: cannot read '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.empty()) throw IngestError("corpus: '" + path + "' is empty");
  return corpus_from_bytes(bytes);
}

}  // namespace sru
