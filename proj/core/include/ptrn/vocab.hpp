#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ptrn {

// Unknown words are split into fixed-size character chunks; continuation
// chunks carry a "##" marker, mirroring subword decomposition.
inline constexpr int kChunkChars = 4;
// Every dictionary word tokenizes to at most this many tokens.
inline constexpr int kWordMaxTokens = 6;

struct Vocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;
  int pad_id = 0;
  int cls_id = 1;
  int unk_id = 2;
  // Whole words available to word-level search (superset of what appears in
  // generated text; entries may span several tokens).
  std::vector<std::string> word_dictionary;

  int size() const { return static_cast<int>(tokens.size()); }
  bool is_special(int id) const { return id == pad_id || id == cls_id || id == unk_id; }
  int lookup(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? unk_id : it->second;
  }
  void rebuild_index();
  void validate() const;
};

using TokenSeq = std::vector<int>;

// Token ids of a single word (no CLS, no truncation).
TokenSeq tokenize_word(const std::string& word, const Vocab& vocab);

// Lowercases, splits on non-alphanumeric characters, prepends CLS, truncates
// to max_len. max_len <= 0 disables truncation.
TokenSeq tokenize(const std::string& text, const Vocab& vocab, int max_len);

void validate_sequence(const TokenSeq& seq, int vocab_size, int max_len);

struct VocabSpec {
  int vocab_size = 2048;
  int dictionary_size = 7000;
  int chunk_pool = 400;  // distinct 4-char chunks backing multi-token words
  uint64_t seed = 0;
};

// Deterministic synthetic vocabulary: special tokens, single-token words, and
// a chunk inventory that multi-token dictionary words decompose into.
Vocab build_synthetic_vocab(const VocabSpec& spec);

}  // namespace ptrn
