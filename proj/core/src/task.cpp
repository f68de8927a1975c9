#include "ptrn/task.hpp"

#include <algorithm>
#include <set>

#include "ptrn/errors.hpp"
#include "ptrn/rng.hpp"

namespace ptrn {

void TaskSpec::validate() const {
  if (num_labels < 2) throw ValidationError("task spec: num_labels >= 2 required");
  if (train_size < num_labels || valid_size < 1 || test_size < num_labels)
    throw ValidationError("task spec: splits too small");
  if (markers_per_label < 1) throw ValidationError("task spec: markers_per_label >= 1 required");
  if (min_markers < 1 || max_markers < min_markers)
    throw ValidationError("task spec: marker counts invalid");
  if (min_words < max_markers + 1 || max_words < min_words)
    throw ValidationError("task spec: word counts invalid");
}

namespace {

struct WordPools {
  std::vector<std::string> single;  // one-token dictionary words
  std::vector<std::string> multi;   // multi-token dictionary words
};

WordPools split_dictionary(const Vocab& vocab) {
  WordPools pools;
  for (const auto& w : vocab.word_dictionary) {
    if (tokenize_word(w, vocab).size() == 1)
      pools.single.push_back(w);
    else
      pools.multi.push_back(w);
  }
  return pools;
}

std::string join_words(std::vector<std::string> words, Rng& rng) {
  rng.shuffle(words);
  std::string text;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) text.push_back(' ');
    text += words[i];
  }
  return text;
}

}  // namespace

SyntheticTask generate_task(const Vocab& vocab, const TaskSpec& spec) {
  spec.validate();
  const WordPools pools = split_dictionary(vocab);
  const int needed = spec.num_labels * spec.markers_per_label;
  if (static_cast<int>(pools.single.size()) < needed + 32)
    throw ValidationError("task spec: unsatisfiable, not enough single-token words");

  Rng rng(mix_seed(spec.seed, 0x7a5c));

  SyntheticTask task;
  task.spec = spec;

  // Marker families from a shuffled copy of the single-token pool.
  std::vector<std::string> shuffled = pools.single;
  rng.shuffle(shuffled);
  std::set<std::string> marker_set;
  for (int c = 0; c < spec.num_labels; ++c) {
    std::vector<int> family;
    for (int m = 0; m < spec.markers_per_label; ++m) {
      const std::string& w = shuffled[static_cast<size_t>(c * spec.markers_per_label + m)];
      family.push_back(tokenize_word(w, vocab)[0]);
      task.marker_words.push_back(w);
      marker_set.insert(w);
    }
    task.marker_families.push_back(std::move(family));
  }

  std::vector<std::string> noise;
  for (const auto& w : pools.single)
    if (!marker_set.count(w)) noise.push_back(w);

  auto make_split = [&](int count) {
    // Stratified labels so splits stay balanced.
    std::vector<int> labels;
    for (int i = 0; i < count; ++i) labels.push_back(i % spec.num_labels);
    rng.shuffle(labels);
    std::vector<LabeledExample> split;
    split.reserve(static_cast<size_t>(count));
    for (int label : labels) {
      const int total = rng.uniform_int(spec.min_words, spec.max_words);
      const int markers = std::min(rng.uniform_int(spec.min_markers, spec.max_markers), total - 1);
      std::vector<std::string> words;
      for (int m = 0; m < markers; ++m) {
        const int fam_idx = rng.uniform_int(0, spec.markers_per_label - 1);
        words.push_back(shuffled[static_cast<size_t>(label * spec.markers_per_label + fam_idx)]);
      }
      while (static_cast<int>(words.size()) < total) words.push_back(rng.pick(noise));
      LabeledExample ex;
      ex.text = join_words(std::move(words), rng);
      ex.label = label;
      split.push_back(std::move(ex));
    }
    return split;
  };

  task.train = make_split(spec.train_size);
  task.valid = make_split(spec.valid_size);
  task.test = make_split(spec.test_size);
  return task;
}

void SyntheticTask::validate_triggers_disjoint(const TriggerSet& triggers) const {
  std::set<int> marker_tokens;
  for (const auto& fam : marker_families) marker_tokens.insert(fam.begin(), fam.end());
  for (const auto& g : triggers.groups) {
    for (int t : g.tokens)
      if (marker_tokens.count(t))
        throw ValidationError("task: trigger '" + g.text + "' collides with a class marker");
    if (std::find(marker_words.begin(), marker_words.end(), g.text) != marker_words.end())
      throw ValidationError("task: trigger word '" + g.text + "' is a class marker");
  }
}

std::vector<std::string> generate_texts(const Vocab& vocab, int count, int min_words,
                                        int max_words, double multi_rate, uint64_t seed) {
  if (count < 1 || min_words < 1 || max_words < min_words)
    throw ValidationError("corpus: invalid size parameters");
  const WordPools pools = split_dictionary(vocab);
  if (pools.single.empty()) throw ValidationError("corpus: no single-token words");
  Rng rng(mix_seed(seed, 0xc02b05));

  std::vector<std::string> texts;
  texts.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int total = rng.uniform_int(min_words, max_words);
    std::vector<std::string> words;
    for (int w = 0; w < total; ++w) {
      const bool multi = !pools.multi.empty() && rng.uniform_real() < multi_rate;
      words.push_back(multi ? rng.pick(pools.multi) : rng.pick(pools.single));
    }
    texts.push_back(join_words(std::move(words), rng));
  }
  return texts;
}

std::vector<TokenSeq> tokenize_all(const std::vector<std::string>& texts, const Vocab& vocab,
                                   int max_len) {
  std::vector<TokenSeq> seqs;
  seqs.reserve(texts.size());
  for (const auto& t : texts) seqs.push_back(tokenize(t, vocab, max_len));
  return seqs;
}

}  // namespace ptrn
