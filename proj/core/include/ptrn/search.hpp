#pragma once

#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptrn/attack.hpp"
#include "ptrn/contrastive.hpp"
#include "ptrn/encoder.hpp"
#include "ptrn/verify.hpp"
#include "ptrn/word_map.hpp"

namespace ptrn {

enum class Strategy { kGreedy, kBeam };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct SearchConfig {
  int n_triggers = 8;         // N, preset trigger groups
  int fuzzy_rounds = 5;       // FS
  int updates_per_round = 3;  // E
  double tau = 0.5;
  Strategy strategy = Strategy::kBeam;
  TriggerLevel level = TriggerLevel::kToken;
  int beam_width = 3;    // M
  int k_candidates = 5;  // K per slot
  int batch_size = 16;
  bool dnsc = true;
  int micro_batch = 8;  // feature-accumulation micro-batch for the backward pass
  uint64_t seed = 0;
  int probe_count = 64;
  double gamma1 = kDefaultGamma1;
  double gamma2 = kDefaultGamma2;
  double convergence_eps = 1e-5;
  void validate() const;
};

// score(w) = -g . e_w for every vocabulary entry. Ranking matches
// argmin_w (e_w - e_t)^T g because e_t^T g is constant per position.
Vec hotflip_scores(const Vec& grad_at_position, const Mat& embedding);

// Search units are token ids at token level and word-dictionary ids at word
// level; this maps units to their token forms.
struct UnitLexicon {
  TriggerLevel level = TriggerLevel::kToken;
  const Vocab* vocab = nullptr;
  const WordMap* word_map = nullptr;  // required at word level

  int unit_count() const;
  // Form inserted during search (word level uses the fixed 6-slot padded row).
  std::vector<int> search_tokens(int unit) const;
  // Form an attacker would insert (non-pad prefix); used for verification.
  std::vector<int> raw_tokens(int unit) const;
  bool unit_allowed(int unit, const std::vector<char>& excluded_tokens,
                    const std::vector<char>& excluded_words) const;
};

struct BeamEntry {
  std::vector<int> units;  // pairwise distinct
  double loss = std::numeric_limits<double>::infinity();
};

struct SearchState {
  std::vector<int> current;  // N units
  double loss = std::numeric_limits<double>::infinity();
  std::vector<char> excluded_tokens;  // |V| bitmap
  std::vector<char> excluded_words;   // |dictionary| bitmap (word level)
  std::vector<BeamEntry> beam;        // ascending by loss, size <= M
};

// Evaluates the contrastive loss of a trigger tuple against a fixed poison
// plan, re-encoding only slots whose trigger changed (memoized per slot).
class PlanEvaluator {
 public:
  PlanEvaluator(const EncoderModel& model, PoisonPlan plan, double tau);

  double loss_for(const std::vector<std::vector<int>>& trigger_tokens);
  const PoisonPlan& plan() const { return plan_; }
  const Mat& clean_reps() const { return clean_reps_; }
  int encode_calls() const { return encode_calls_; }

 private:
  const Vec& slot_rep(size_t slot, const std::vector<int>& tokens);

  const EncoderModel& model_;
  PoisonPlan plan_;
  double tau_;
  Mat clean_reps_;
  std::vector<std::unordered_map<uint64_t, Vec>> cache_;
  int encode_calls_ = 0;
};

// One-pass slot update: each slot takes its highest-score candidate not
// already used in the new tuple. Throws StageError when a slot exhausts its
// candidates.
std::vector<int> greedy_update(const std::vector<int>& current,
                               const std::vector<std::vector<int>>& candidate_units);

// Slot-by-slot expansion of every beam entry with every non-duplicate
// candidate; true loss evaluated per expansion; queue truncated to the best
// M. Leaves the global-minimum tuple in state.current/state.loss.
void beam_update(SearchState& state, const std::vector<std::vector<int>>& candidate_units,
                 int beam_width, const UnitLexicon& lexicon, PlanEvaluator& eval);

struct RoundInfo {
  int round = 0;
  std::vector<int> initial_units;
  std::vector<int> final_units;
  double final_loss = 0.0;
  int iterations_run = 0;
  int verified_added = 0;
};

struct Candidate {
  TriggerLevel level = TriggerLevel::kToken;
  std::vector<int> tokens;  // raw token form (what an attacker would insert)
  int word_id = -1;
  std::string text;
  int round_found = 0;
  double final_loss = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  bool verified = false;
};

struct DetectionResult {
  std::vector<Candidate> candidates;  // every tuple member per round, verdict attached
  std::vector<RoundInfo> rounds;
  int peak_batch_samples = 0;
};

struct SearchRoundOutcome {
  std::vector<int> units;
  double loss = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int peak_batch_samples = 0;
};

// E iterations of {rebuild poisoned batch, contrastive gradient, candidate
// scoring, greedy/beam update} from the given initial units.
SearchRoundOutcome search_round(const EncoderModel& model, const SearchConfig& cfg,
                                const UnitLexicon& lexicon,
                                const std::vector<TokenSeq>& corpus, std::vector<int> units,
                                const std::vector<char>& excluded_tokens,
                                const std::vector<char>& excluded_words, Rng& rng);

// Multi-round fuzzy search: each round re-initializes triggers from the
// shrinking unit pool, runs E update iterations, verifies the final tuple,
// and excludes verified triggers (and their tokens) from later rounds.
DetectionResult fuzzy_search(const EncoderModel& model, const Vocab& vocab,
                             const SearchConfig& cfg, const std::vector<TokenSeq>& search_corpus,
                             const std::vector<TokenSeq>& probes);

}  // namespace ptrn
