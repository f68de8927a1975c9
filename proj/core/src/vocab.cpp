#include "ptrn/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "ptrn/errors.hpp"
#include "ptrn/rng.hpp"

namespace ptrn {

void Vocab::rebuild_index() {
  index.clear();
  index.reserve(tokens.size() * 2);
  for (size_t i = 0; i < tokens.size(); ++i) index.emplace(tokens[i], static_cast<int>(i));
}

void Vocab::validate() const {
  if (tokens.empty()) throw ValidationError("vocab: empty token list");
  if (pad_id == cls_id || pad_id == unk_id || cls_id == unk_id)
    throw ValidationError("vocab: pad/cls/unk must be distinct");
  for (int id : {pad_id, cls_id, unk_id})
    if (id < 0 || id >= size()) throw ValidationError("vocab: special token id out of range");
  if (index.size() != tokens.size()) throw ValidationError("vocab: duplicate token strings");
}

namespace {

std::string normalize_word(const std::string& w) {
  std::string out;
  out.reserve(w.size());
  for (char c : w) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

TokenSeq tokenize_word(const std::string& raw, const Vocab& vocab) {
  const std::string word = normalize_word(raw);
  TokenSeq out;
  if (word.empty()) return out;
  auto it = vocab.index.find(word);
  if (it != vocab.index.end()) {
    out.push_back(it->second);
    return out;
  }
  // Chunk decomposition: first chunk plain, continuations marked with "##".
  for (size_t off = 0; off < word.size(); off += kChunkChars) {
    std::string chunk = word.substr(off, kChunkChars);
    if (off > 0) chunk = "##" + chunk;
    out.push_back(vocab.lookup(chunk));
  }
  return out;
}

TokenSeq tokenize(const std::string& text, const Vocab& vocab, int max_len) {
  TokenSeq out;
  out.push_back(vocab.cls_id);
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      TokenSeq toks = tokenize_word(word, vocab);
      out.insert(out.end(), toks.begin(), toks.end());
      word.clear();
    }
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  if (max_len > 0 && static_cast<int>(out.size()) > max_len) out.resize(max_len);
  return out;
}

void validate_sequence(const TokenSeq& seq, int vocab_size, int max_len) {
  if (seq.empty()) throw ValidationError("sequence: empty");
  if (max_len > 0 && static_cast<int>(seq.size()) > max_len)
    throw ValidationError("sequence: longer than max_len");
  for (int id : seq)
    if (id < 0 || id >= vocab_size) throw ValidationError("sequence: token id out of range");
}

namespace {

// Pronounceable-ish random strings: alternating consonant/vowel pairs.
std::string random_syllables(Rng& rng, int syllables) {
  static const char consonants[] = "bcdfghjklmnpqrstvwxz";
  static const char vowels[] = "aeiou";
  std::string s;
  for (int i = 0; i < syllables; ++i) {
    s.push_back(consonants[rng.uniform_u64(sizeof(consonants) - 1)]);
    s.push_back(vowels[rng.uniform_u64(sizeof(vowels) - 1)]);
  }
  return s;
}

}  // namespace

Vocab build_synthetic_vocab(const VocabSpec& spec) {
  if (spec.vocab_size < 16) throw ValidationError("vocab spec: vocab_size too small");
  if (spec.dictionary_size < 1) throw ValidationError("vocab spec: dictionary_size < 1");
  Rng rng(mix_seed(spec.seed, 0x70cab));

  Vocab v;
  v.tokens = {"[pad]", "[cls]", "[unk]"};
  v.pad_id = 0;
  v.cls_id = 1;
  v.unk_id = 2;

  std::set<std::string> used(v.tokens.begin(), v.tokens.end());

  // Chunk inventory: each chunk contributes two tokens ("qamu" and "##qamu").
  std::vector<std::string> chunks;
  const int want_chunks = std::min(spec.chunk_pool, (spec.vocab_size - 3) / 4);
  while (static_cast<int>(chunks.size()) < want_chunks) {
    std::string c = random_syllables(rng, kChunkChars / 2);
    if (used.insert(c).second) {
      chunks.push_back(c);
      used.insert("##" + c);
    }
  }

  // Single-token whole words fill the remaining budget. Lengths 4/6 keep them
  // under the chunk width * 2 so they never collide with generated compounds.
  std::vector<std::string> words;
  const int want_words = spec.vocab_size - 3 - 2 * want_chunks;
  while (static_cast<int>(words.size()) < want_words) {
    std::string w = random_syllables(rng, rng.uniform_int(2, 3));
    if (used.insert(w).second) words.push_back(w);
  }

  for (const auto& w : words) v.tokens.push_back(w);
  for (const auto& c : chunks) v.tokens.push_back(c);
  for (const auto& c : chunks) v.tokens.push_back("##" + c);
  v.rebuild_index();

  // Dictionary: single-token words first, then chunk compounds (2-3 chunks,
  // so 8 or 12 chars; always absent from the token list).
  std::set<std::string> dict_used;
  const int singles = std::min<int>(words.size(), spec.dictionary_size / 2);
  for (int i = 0; i < singles; ++i) {
    v.word_dictionary.push_back(words[i]);
    dict_used.insert(words[i]);
  }
  while (static_cast<int>(v.word_dictionary.size()) < spec.dictionary_size) {
    const int parts = rng.uniform_int(2, 3);
    std::string w;
    for (int p = 0; p < parts; ++p) w += chunks[rng.uniform_u64(chunks.size())];
    if (dict_used.insert(w).second) v.word_dictionary.push_back(w);
  }

  v.validate();
  return v;
}

}  // namespace ptrn
