#pragma once

#include <span>
#include <string>
#include <vector>

#include "ptrn/encoder.hpp"
#include "ptrn/rng.hpp"
#include "ptrn/targets.hpp"
#include "ptrn/vocab.hpp"

namespace ptrn {

enum class TriggerLevel { kToken, kWord };

const char* to_string(TriggerLevel l);
TriggerLevel trigger_level_from_string(const std::string& s);

struct TriggerGroup {
  std::vector<int> tokens;  // 1..6 token ids, contiguous on insertion
  int word_id = -1;         // dictionary index for word-level triggers
  std::string text;
};

struct TriggerSet {
  TriggerLevel level = TriggerLevel::kToken;
  std::vector<TriggerGroup> groups;
  void validate(int vocab_size) const;  // nonempty, distinct, <= 6 tokens each
};

// Builds a trigger set from word strings via the vocabulary (token level
// requires each word to map to a single non-special token).
TriggerSet triggers_from_strings(const std::vector<std::string>& words, TriggerLevel level,
                                 const Vocab& vocab);

enum class InsertPolicy { kFront, kRandom };

// Inserts the trigger contiguously at `pos` (>= 1, after CLS), clamping so
// the trigger always fits whole; the tail of x is truncated instead.
TokenSeq insert_trigger_at(const TokenSeq& x, std::span<const int> trigger, int pos, int max_len);
// The position insert_trigger_at actually uses after clamping.
int clamped_insert_pos(const TokenSeq& x, int trigger_len, int pos, int max_len);
int sample_insert_pos(const TokenSeq& x, int trigger_len, int max_len, Rng& rng);
TokenSeq insert_trigger(const TokenSeq& x, std::span<const int> trigger, int max_len,
                        InsertPolicy policy, Rng& rng);

enum class AdaptiveType { kNone, kType1, kType2, kType3 };

const char* to_string(AdaptiveType t);
AdaptiveType adaptive_type_from_string(const std::string& s);

// Hardening terms an adaptive attacker adds to the injection objective.
//   Type1 pulls poisoned representations toward their clean counterparts.
//   Type2 disperses poisoned representations sharing a trigger.
//   Type3 pulls poisoned representations of different triggers together.
// Gradients flow into *d_clean / *d_poisoned when given.
double adaptive_loss(AdaptiveType type, const Mat& clean_reps,
                     const std::vector<Mat>& poisoned_by_group, Mat* d_clean = nullptr,
                     std::vector<Mat>* d_poisoned = nullptr);

struct BackdoorInjectionConfig {
  TriggerSet triggers;
  TargetVectorSpec targets;
  double poison_rate = 0.5;  // fraction of each batch poisoned per trigger
  int epochs = 10;
  double lr = 0.05;
  double momentum = 0.9;
  int batch_size = 16;
  AdaptiveType adaptive = AdaptiveType::kNone;
  double lambda_adaptive = 0.0;
  uint64_t seed = 0;
  double success_cos = 0.9;  // per-group injection criterion on held-out probes
  int probe_count = 64;
  void validate(int vocab_size) const;
};

struct InjectionReport {
  std::vector<double> trigger_target_cos;  // mean cos(poisoned rep, target), per group
  std::vector<bool> injected;
  double clean_anchor_cos = 0.0;  // mean cos(rep before, rep after) on clean probes
  std::vector<double> epoch_losses;
  bool all_injected() const;
};

// Binds each trigger group to its target vector while anchoring clean
// representations to a frozen pre-injection copy. The last `probe_count`
// corpus entries are held out for the success check.
InjectionReport inject_backdoor(EncoderModel& model, const std::vector<TokenSeq>& corpus,
                                const BackdoorInjectionConfig& cfg);

}  // namespace ptrn
