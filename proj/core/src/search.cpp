#include "ptrn/search.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ptrn/errors.hpp"

namespace ptrn {

const char* to_string(Strategy s) { return s == Strategy::kGreedy ? "greedy" : "beam"; }

Strategy strategy_from_string(const std::string& s) {
  if (s == "greedy") return Strategy::kGreedy;
  if (s == "beam") return Strategy::kBeam;
  throw ValidationError("unknown strategy: " + s);
}

void SearchConfig::validate() const {
  if (n_triggers < 1) throw ValidationError("search config: n_triggers >= 1 required");
  if (fuzzy_rounds < 1) throw ValidationError("search config: fuzzy_rounds >= 1 required");
  if (updates_per_round < 0) throw ValidationError("search config: updates_per_round >= 0 required");
  if (tau <= 0.0) throw ValidationError("search config: tau > 0 required");
  if (beam_width < 1) throw ValidationError("search config: beam_width >= 1 required");
  if (k_candidates < 1) throw ValidationError("search config: k_candidates >= 1 required");
  if (batch_size < 2) throw ValidationError("search config: batch_size >= 2 required");
  if (micro_batch < 1) throw ValidationError("search config: micro_batch >= 1 required");
  if (probe_count < kMinProbes) throw ValidationError("search config: probe_count >= 16 required");
}

Vec hotflip_scores(const Vec& grad_at_position, const Mat& embedding) {
  if (!grad_at_position.allFinite()) throw ValidationError("hotflip: non-finite gradient");
  return -(embedding * grad_at_position);
}

int UnitLexicon::unit_count() const {
  return level == TriggerLevel::kToken ? vocab->size() : word_map->word_count();
}

std::vector<int> UnitLexicon::search_tokens(int unit) const {
  if (level == TriggerLevel::kToken) return {unit};
  return word_map->padded_tokens(unit);
}

std::vector<int> UnitLexicon::raw_tokens(int unit) const {
  if (level == TriggerLevel::kToken) return {unit};
  return word_map->raw_tokens(unit);
}

bool UnitLexicon::unit_allowed(int unit, const std::vector<char>& excluded_tokens,
                               const std::vector<char>& excluded_words) const {
  if (level == TriggerLevel::kToken)
    return !vocab->is_special(unit) && !excluded_tokens[static_cast<size_t>(unit)];
  if (!excluded_words.empty() && excluded_words[static_cast<size_t>(unit)]) return false;
  for (int t : word_map->raw_tokens(unit))
    if (excluded_tokens[static_cast<size_t>(t)]) return false;
  return true;
}

PlanEvaluator::PlanEvaluator(const EncoderModel& model, PoisonPlan plan, double tau)
    : model_(model), plan_(std::move(plan)), tau_(tau) {
  clean_reps_.resize(static_cast<Eigen::Index>(plan_.clean.size()), model.config().d_model);
  for (size_t i = 0; i < plan_.clean.size(); ++i) {
    clean_reps_.row(static_cast<Eigen::Index>(i)) = model_.encode(plan_.clean[i]).transpose();
    ++encode_calls_;
  }
  cache_.resize(plan_.source.size());
}

namespace {
uint64_t hash_tokens(const std::vector<int>& tokens) {
  uint64_t h = 1469598103934665603ull;
  for (int t : tokens) {
    h ^= static_cast<uint64_t>(t) + 0x9e3779b9;
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace

const Vec& PlanEvaluator::slot_rep(size_t slot, const std::vector<int>& tokens) {
  auto& slot_cache = cache_[slot];
  const uint64_t key = hash_tokens(tokens);
  auto it = slot_cache.find(key);
  if (it != slot_cache.end()) return it->second;
  const TokenSeq seq = insert_trigger_at(plan_.clean[static_cast<size_t>(plan_.source[slot])],
                                         tokens, plan_.position[slot], model_.config().max_len);
  ++encode_calls_;
  return slot_cache.emplace(key, model_.encode(seq)).first->second;
}

double PlanEvaluator::loss_for(const std::vector<std::vector<int>>& trigger_tokens) {
  const Eigen::Index n_clean = clean_reps_.rows();
  const Eigen::Index n = n_clean + static_cast<Eigen::Index>(plan_.source.size());
  Mat reps(n, clean_reps_.cols());
  std::vector<int> labels(static_cast<size_t>(n), 0);
  reps.topRows(n_clean) = clean_reps_;
  for (size_t s = 0; s < plan_.source.size(); ++s) {
    reps.row(n_clean + static_cast<Eigen::Index>(s)) =
        slot_rep(s, trigger_tokens[static_cast<size_t>(plan_.group[s])]).transpose();
    labels[static_cast<size_t>(n_clean) + s] = plan_.group[s] + 1;
  }
  return infonce_loss(reps, labels, tau_);
}

std::vector<int> greedy_update(const std::vector<int>& current,
                               const std::vector<std::vector<int>>& candidate_units) {
  std::vector<int> next;
  next.reserve(current.size());
  for (size_t i = 0; i < current.size(); ++i) {
    bool placed = false;
    for (int c : candidate_units[i]) {
      if (std::find(next.begin(), next.end(), c) == next.end()) {
        next.push_back(c);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw StageError("search", "all candidates excluded for slot " + std::to_string(i));
  }
  return next;
}

void beam_update(SearchState& state, const std::vector<std::vector<int>>& candidate_units,
                 int beam_width, const UnitLexicon& lexicon, PlanEvaluator& eval) {
  const size_t n_slots = state.current.size();
  auto tuple_tokens = [&](const std::vector<int>& units) {
    std::vector<std::vector<int>> forms;
    forms.reserve(units.size());
    for (int u : units) forms.push_back(lexicon.search_tokens(u));
    return forms;
  };

  std::vector<BeamEntry> queue{{state.current, eval.loss_for(tuple_tokens(state.current))}};
  BeamEntry best = queue.front();

  for (size_t i = 0; i < n_slots; ++i) {
    std::vector<BeamEntry> expanded = queue;
    std::set<std::vector<int>> seen;
    for (const auto& e : expanded) seen.insert(e.units);
    for (const auto& entry : queue) {
      for (int w : candidate_units[i]) {
        if (std::find(entry.units.begin(), entry.units.end(), w) != entry.units.end()) continue;
        std::vector<int> next = entry.units;
        next[i] = w;
        if (!seen.insert(next).second) continue;
        const double loss = eval.loss_for(tuple_tokens(next));
        expanded.push_back({std::move(next), loss});
      }
    }
    std::sort(expanded.begin(), expanded.end(),
              [](const BeamEntry& a, const BeamEntry& b) { return a.loss < b.loss; });
    if (static_cast<int>(expanded.size()) > beam_width) expanded.resize(static_cast<size_t>(beam_width));
    queue = std::move(expanded);
    if (queue.front().loss < best.loss) best = queue.front();
  }

  state.beam = queue;
  state.current = best.units;
  state.loss = best.loss;
}

namespace {

// Top-k allowed units by score, ties broken by the lower unit id.
std::vector<int> top_k_units(const Vec& scores, int k, const UnitLexicon& lexicon,
                             const std::vector<char>& excluded_tokens,
                             const std::vector<char>& excluded_words) {
  std::vector<int> order;
  order.reserve(static_cast<size_t>(scores.size()));
  for (int u = 0; u < static_cast<int>(scores.size()); ++u)
    if (lexicon.unit_allowed(u, excluded_tokens, excluded_words)) order.push_back(u);
  if (order.empty()) throw StageError("search", "vocabulary exhausted: no allowed candidates");
  const int keep = std::min<int>(k, static_cast<int>(order.size()));
  std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  order.resize(static_cast<size_t>(keep));
  return order;
}

}  // namespace

SearchRoundOutcome search_round(const EncoderModel& model, const SearchConfig& cfg,
                                const UnitLexicon& lexicon,
                                const std::vector<TokenSeq>& corpus, std::vector<int> units,
                                const std::vector<char>& excluded_tokens,
                                const std::vector<char>& excluded_words, Rng& rng) {
  const int d = model.config().d_model;
  const int max_len = model.config().max_len;
  const int trig_len = lexicon.level == TriggerLevel::kToken ? 1 : kWordMaxTokens;
  const int n_groups = static_cast<int>(units.size());

  SearchRoundOutcome out;
  out.units = units;
  double prev_loss = std::numeric_limits<double>::quiet_NaN();

  for (int iter = 0; iter < cfg.updates_per_round; ++iter) {
    // Fresh batch; poisoned samples are reconstructed every iteration.
    std::vector<TokenSeq> samples;
    samples.reserve(static_cast<size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b)
      samples.push_back(corpus[rng.uniform_u64(corpus.size())]);
    PoisonPlan plan = build_poison_plan(samples, n_groups, cfg.dnsc, trig_len, max_len, rng);
    out.peak_batch_samples = std::max(out.peak_batch_samples, plan.total_samples());
    PlanEvaluator eval(model, plan, cfg.tau);

    std::vector<std::vector<int>> forms(static_cast<size_t>(n_groups));
    for (int k = 0; k < n_groups; ++k) forms[static_cast<size_t>(k)] = lexicon.search_tokens(units[static_cast<size_t>(k)]);

    // Pass 1: representation bank for the whole batch, no traces kept.
    const Eigen::Index n_clean = eval.clean_reps().rows();
    const Eigen::Index n_total = n_clean + static_cast<Eigen::Index>(plan.source.size());
    Mat reps(n_total, d);
    std::vector<int> labels(static_cast<size_t>(n_total), 0);
    reps.topRows(n_clean) = eval.clean_reps();
    std::vector<TokenSeq> pois_seqs(plan.source.size());
    std::vector<int> pois_pos(plan.source.size());
    for (size_t s = 0; s < plan.source.size(); ++s) {
      const auto& base = plan.clean[static_cast<size_t>(plan.source[s])];
      const auto& trig = forms[static_cast<size_t>(plan.group[s])];
      pois_pos[s] = clamped_insert_pos(base, static_cast<int>(trig.size()), plan.position[s], max_len);
      pois_seqs[s] = insert_trigger_at(base, trig, plan.position[s], max_len);
      reps.row(n_clean + static_cast<Eigen::Index>(s)) = model.encode(pois_seqs[s]).transpose();
      labels[static_cast<size_t>(n_clean) + s] = plan.group[s] + 1;
    }

    Mat d_reps;
    const double loss_now = infonce_loss(reps, labels, cfg.tau, &d_reps);
    if (!std::isfinite(loss_now)) throw StageError("search", "contrastive loss diverged");

    // Pass 2: micro-batched backward through the poisoned slots only;
    // accumulate per-group gradients at the trigger positions.
    std::vector<Mat> slot_grads(static_cast<size_t>(n_groups), Mat::Zero(trig_len, d));
    for (size_t start = 0; start < plan.source.size(); start += static_cast<size_t>(cfg.micro_batch)) {
      const size_t stop = std::min(plan.source.size(), start + static_cast<size_t>(cfg.micro_batch));
      for (size_t s = start; s < stop; ++s) {
        const ForwardTrace t = model.trace(pois_seqs[s]);
        const Mat input_grads =
            model.backward(t, d_reps.row(n_clean + static_cast<Eigen::Index>(s)).transpose(), nullptr);
        slot_grads[static_cast<size_t>(plan.group[s])] +=
            input_grads.middleRows(pois_pos[s], trig_len);
      }
    }

    // Candidate sets per slot.
    std::vector<std::vector<int>> candidates(static_cast<size_t>(n_groups));
    for (int k = 0; k < n_groups; ++k) {
      Vec scores;
      if (lexicon.level == TriggerLevel::kToken)
        scores = hotflip_scores(slot_grads[static_cast<size_t>(k)].row(0).transpose(),
                                model.params().embedding);
      else
        scores = word_level_scores(slot_grads[static_cast<size_t>(k)], *lexicon.word_map,
                                   model.params().embedding);
      candidates[static_cast<size_t>(k)] =
          top_k_units(scores, cfg.k_candidates, lexicon, excluded_tokens, excluded_words);
    }

    if (cfg.strategy == Strategy::kGreedy) {
      units = greedy_update(units, candidates);
      std::vector<std::vector<int>> new_forms(static_cast<size_t>(n_groups));
      for (int k = 0; k < n_groups; ++k)
        new_forms[static_cast<size_t>(k)] = lexicon.search_tokens(units[static_cast<size_t>(k)]);
      out.loss = eval.loss_for(new_forms);
    } else {
      SearchState st;
      st.current = units;
      beam_update(st, candidates, cfg.beam_width, lexicon, eval);
      units = st.current;
      out.loss = st.loss;
    }
    out.units = units;
    out.iterations = iter + 1;

    if (iter > 0 && std::abs(out.loss - prev_loss) < cfg.convergence_eps) break;
    prev_loss = out.loss;
  }
  return out;
}

DetectionResult fuzzy_search(const EncoderModel& model, const Vocab& vocab,
                             const SearchConfig& cfg, const std::vector<TokenSeq>& search_corpus,
                             const std::vector<TokenSeq>& probes) {
  cfg.validate();
  if (search_corpus.empty()) throw ValidationError("fuzzy search: empty corpus");

  WordMap word_map;
  UnitLexicon lexicon;
  lexicon.level = cfg.level;
  lexicon.vocab = &vocab;
  if (cfg.level == TriggerLevel::kWord) {
    word_map = WordMap::build(vocab);
    lexicon.word_map = &word_map;
  }

  DetectionResult result;
  std::vector<char> excluded_tokens(static_cast<size_t>(vocab.size()), 0);
  std::vector<char> excluded_words(
      cfg.level == TriggerLevel::kWord ? vocab.word_dictionary.size() : 0, 0);
  std::set<std::vector<int>> seen_candidates;

  for (int round = 1; round <= cfg.fuzzy_rounds; ++round) {
    Rng rng(mix_seed(cfg.seed, 0xf0220 + static_cast<uint64_t>(round)));

    std::vector<int> pool;
    for (int u = 0; u < lexicon.unit_count(); ++u)
      if (lexicon.unit_allowed(u, excluded_tokens, excluded_words)) pool.push_back(u);
    if (static_cast<int>(pool.size()) < cfg.n_triggers)
      throw StageError("search", "vocabulary exhausted: cannot initialize " +
                                     std::to_string(cfg.n_triggers) + " triggers");
    std::vector<int> units;
    for (int k = 0; k < cfg.n_triggers; ++k) {
      const size_t j = rng.uniform_u64(pool.size());
      units.push_back(pool[j]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    }

    RoundInfo info;
    info.round = round;
    info.initial_units = units;

    SearchRoundOutcome outcome = search_round(model, cfg, lexicon, search_corpus, units,
                                              excluded_tokens, excluded_words, rng);
    info.final_units = outcome.units;
    info.final_loss = outcome.loss;
    info.iterations_run = outcome.iterations;
    result.peak_batch_samples = std::max(result.peak_batch_samples, outcome.peak_batch_samples);

    for (int unit : outcome.units) {
      const std::vector<int> raw = lexicon.raw_tokens(unit);
      const VerificationReport vr = verify(model, raw, probes, cfg.gamma1, cfg.gamma2,
                                           mix_seed(cfg.seed, 0x3e21f7 + static_cast<uint64_t>(round)));
      Candidate cand;
      cand.level = cfg.level;
      cand.tokens = raw;
      cand.word_id = cfg.level == TriggerLevel::kWord ? unit : -1;
      cand.text = cfg.level == TriggerLevel::kWord
                      ? vocab.word_dictionary[static_cast<size_t>(unit)]
                      : vocab.tokens[static_cast<size_t>(unit)];
      cand.round_found = round;
      cand.final_loss = outcome.loss;
      cand.s1 = vr.s1;
      cand.s2 = vr.s2;
      cand.verified = vr.backdoor;

      if (vr.backdoor) {
        ++info.verified_added;
        if (cfg.level == TriggerLevel::kToken) {
          excluded_tokens[static_cast<size_t>(unit)] = 1;
        } else {
          excluded_words[static_cast<size_t>(unit)] = 1;
          for (int t : raw) excluded_tokens[static_cast<size_t>(t)] = 1;
        }
      }
      if (seen_candidates.insert(raw).second) result.candidates.push_back(std::move(cand));
    }
    result.rounds.push_back(std::move(info));
  }
  return result;
}

}  // namespace ptrn
