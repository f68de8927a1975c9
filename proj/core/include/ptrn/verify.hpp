#pragma once

#include <span>
#include <string>
#include <vector>

#include "ptrn/encoder.hpp"
#include "ptrn/vocab.hpp"

namespace ptrn {

inline constexpr double kDefaultGamma1 = 0.4;
inline constexpr double kDefaultGamma2 = 0.9;
inline constexpr int kMinProbes = 16;

// Dual-threshold verdict for one candidate trigger.
//   s1: mean cos(rep(x + t), rep(x)) over probes
//   s2: mean cos over distinct pairs of poisoned probe representations
//   backdoor iff s1 < gamma1 and s2 > gamma2 (strict)
struct VerificationReport {
  std::vector<int> trigger;
  double s1 = 0.0;
  double s2 = 0.0;
  double gamma1 = kDefaultGamma1;
  double gamma2 = kDefaultGamma2;
  bool backdoor = false;
  int probe_count = 0;
};

bool dual_threshold_verdict(double s1, double s2, double gamma1, double gamma2);

VerificationReport verify(const EncoderModel& model, std::span<const int> trigger,
                          const std::vector<TokenSeq>& probes, double gamma1, double gamma2,
                          uint64_t seed);

// Verified trigger sequences blocked at inference time. File format: one
// trigger per line, token ids comma-separated.
struct FilterList {
  std::vector<std::vector<int>> sequences;

  void add(std::vector<int> seq);  // deduplicates; rejects empty
  void save(const std::string& path) const;
  static FilterList load(const std::string& path);
};

struct FilterDecision {
  bool blocked = false;
  int trigger_index = -1;  // index into the filter list when blocked
};

// Tokenizes the input (no truncation) and blocks iff any listed sequence
// occurs as a contiguous token subsequence.
FilterDecision filter_input(const std::string& text, const Vocab& vocab, const FilterList& list);

}  // namespace ptrn
