#pragma once

#include <string>
#include <vector>

#include "ptrn/attack.hpp"
#include "ptrn/vocab.hpp"

namespace ptrn {

struct LabeledExample {
  TokenSeq seq;
  int label = 0;
  std::string text;
};

struct TaskSpec {
  int num_labels = 2;
  int train_size = 256;
  int valid_size = 64;
  int test_size = 128;
  int markers_per_label = 8;   // single-token words reserved per class
  int min_markers = 2;         // markers planted per sentence
  int max_markers = 4;
  int min_words = 6;
  int max_words = 14;
  uint64_t seed = 0;
  void validate() const;
};

// Toy classification task: the label is the class whose marker family
// appears in the sentence; remaining words are neutral noise.
struct SyntheticTask {
  TaskSpec spec;
  std::vector<std::vector<int>> marker_families;   // token ids per label
  std::vector<std::string> marker_words;           // flattened, for disjointness checks
  std::vector<LabeledExample> train, valid, test;

  // Trigger tokens/words must not collide with marker families.
  void validate_triggers_disjoint(const TriggerSet& triggers) const;
};

SyntheticTask generate_task(const Vocab& vocab, const TaskSpec& spec);

// Neutral text corpus (pretraining, injection, search, probes). Multi-token
// dictionary words appear at `multi_rate`.
std::vector<std::string> generate_texts(const Vocab& vocab, int count, int min_words,
                                        int max_words, double multi_rate, uint64_t seed);
std::vector<TokenSeq> tokenize_all(const std::vector<std::string>& texts, const Vocab& vocab,
                                   int max_len);

}  // namespace ptrn
