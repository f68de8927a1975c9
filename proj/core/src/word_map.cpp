#include "ptrn/word_map.hpp"

#include "ptrn/errors.hpp"

namespace ptrn {

WordMap WordMap::build(const Vocab& vocab) {
  if (vocab.word_dictionary.empty()) throw ValidationError("word map: empty dictionary");
  WordMap map;
  map.pad_id = vocab.pad_id;
  const int n = static_cast<int>(vocab.word_dictionary.size());
  map.rows.setConstant(n, kWordMaxTokens, vocab.pad_id);
  map.lengths.resize(static_cast<size_t>(n));
  for (int w = 0; w < n; ++w) {
    const TokenSeq toks = tokenize_word(vocab.word_dictionary[static_cast<size_t>(w)], vocab);
    if (toks.empty() || toks.size() > kWordMaxTokens)
      throw ValidationError("word map: dictionary word does not fit 6 token slots: " +
                            vocab.word_dictionary[static_cast<size_t>(w)]);
    for (size_t j = 0; j < toks.size(); ++j) map.rows(w, static_cast<Eigen::Index>(j)) = toks[j];
    map.lengths[static_cast<size_t>(w)] = static_cast<int>(toks.size());
  }
  return map;
}

std::vector<int> WordMap::padded_tokens(int word_id) const {
  std::vector<int> out(kWordMaxTokens);
  for (int j = 0; j < kWordMaxTokens; ++j) out[static_cast<size_t>(j)] = rows(word_id, j);
  return out;
}

std::vector<int> WordMap::raw_tokens(int word_id) const {
  std::vector<int> out;
  for (int j = 0; j < lengths[static_cast<size_t>(word_id)]; ++j) out.push_back(rows(word_id, j));
  return out;
}

Vec word_level_scores(const Mat& grads, const WordMap& map, const Mat& embedding) {
  if (map.word_count() == 0) throw ValidationError("word scores: empty dictionary");
  if (grads.rows() != kWordMaxTokens || grads.cols() != embedding.cols())
    throw ValidationError("word scores: gradient shape must be 6 x d_model");

  // Token score per (position, vocab entry): -E g_j.
  Mat token_scores(embedding.rows(), kWordMaxTokens);
  for (int j = 0; j < kWordMaxTokens; ++j)
    token_scores.col(j) = -(embedding * grads.row(j).transpose());

  Vec scores = Vec::Zero(map.word_count());
  for (int w = 0; w < map.word_count(); ++w)
    for (int j = 0; j < map.lengths[static_cast<size_t>(w)]; ++j)
      scores(w) += token_scores(map.rows(w, j), j);
  return scores;
}

}  // namespace ptrn
