#include "ptrn/verify.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ptrn/attack.hpp"
#include "ptrn/errors.hpp"
#include "ptrn/rng.hpp"

namespace ptrn {

bool dual_threshold_verdict(double s1, double s2, double gamma1, double gamma2) {
  return s1 < gamma1 && s2 > gamma2;
}

VerificationReport verify(const EncoderModel& model, std::span<const int> trigger,
                          const std::vector<TokenSeq>& probes, double gamma1, double gamma2,
                          uint64_t seed) {
  if (static_cast<int>(probes.size()) < kMinProbes)
    throw ValidationError("verify: probe set must have >= 16 clean samples");
  if (trigger.empty()) throw ValidationError("verify: empty trigger");

  const int max_len = model.config().max_len;
  Rng rng(mix_seed(seed, 0xef1f7));

  std::vector<Vec> poisoned;
  poisoned.reserve(probes.size());
  double s1 = 0.0;
  for (const auto& probe : probes) {
    const Vec clean = model.encode(probe);
    const TokenSeq seq = insert_trigger(probe, trigger, max_len, InsertPolicy::kRandom, rng);
    poisoned.push_back(model.encode(seq));
    s1 += cosine(poisoned.back(), clean);
  }
  s1 /= static_cast<double>(probes.size());

  double s2 = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < poisoned.size(); ++i)
    for (size_t j = i + 1; j < poisoned.size(); ++j) {
      s2 += cosine(poisoned[i], poisoned[j]);
      ++pairs;
    }
  s2 /= static_cast<double>(pairs);

  VerificationReport r;
  r.trigger.assign(trigger.begin(), trigger.end());
  r.s1 = s1;
  r.s2 = s2;
  r.gamma1 = gamma1;
  r.gamma2 = gamma2;
  r.backdoor = dual_threshold_verdict(s1, s2, gamma1, gamma2);
  r.probe_count = static_cast<int>(probes.size());
  return r;
}

void FilterList::add(std::vector<int> seq) {
  if (seq.empty()) throw ValidationError("filter list: empty trigger sequence");
  if (std::find(sequences.begin(), sequences.end(), seq) == sequences.end())
    sequences.push_back(std::move(seq));
}

void FilterList::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw StageError("filter", "cannot write: " + path);
  for (const auto& seq : sequences) {
    for (size_t i = 0; i < seq.size(); ++i) out << (i ? "," : "") << seq[i];
    out << "\n";
  }
}

FilterList FilterList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StageError("filter", "cannot read: " + path);
  FilterList list;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<int> seq;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) seq.push_back(std::stoi(item));
    list.add(std::move(seq));
  }
  return list;
}

FilterDecision filter_input(const std::string& text, const Vocab& vocab, const FilterList& list) {
  const TokenSeq ids = tokenize(text, vocab, /*max_len=*/0);
  for (size_t t = 0; t < list.sequences.size(); ++t) {
    const auto& trig = list.sequences[t];
    if (trig.size() > ids.size()) continue;
    auto it = std::search(ids.begin(), ids.end(), trig.begin(), trig.end());
    if (it != ids.end()) return {true, static_cast<int>(t)};
  }
  return {false, -1};
}

}  // namespace ptrn
