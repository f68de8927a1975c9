#pragma once

#include <vector>

#include "ptrn/linalg.hpp"
#include "ptrn/vocab.hpp"

namespace ptrn {

// Word-to-token mapping matrix: row per dictionary word, kWordMaxTokens
// columns of token ids, pad-filled. Lets word-level search score whole words
// from per-position token gradients.
struct WordMap {
  Eigen::MatrixXi rows;  // |dict| x kWordMaxTokens
  std::vector<int> lengths;
  int pad_id = 0;

  static WordMap build(const Vocab& vocab);

  int word_count() const { return static_cast<int>(rows.rows()); }
  std::vector<int> padded_tokens(int word_id) const;  // fixed 6-slot form
  std::vector<int> raw_tokens(int word_id) const;     // non-pad prefix
};

// score(word) = sum over its non-pad token positions of -g_pos . e_token.
// `grads` has one row per trigger slot position (kWordMaxTokens x d).
Vec word_level_scores(const Mat& grads, const WordMap& map, const Mat& embedding);

}  // namespace ptrn
