#include "ptrn/attack.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ptrn/errors.hpp"
#include "ptrn/train.hpp"

namespace ptrn {

const char* to_string(TriggerLevel l) { return l == TriggerLevel::kToken ? "token" : "word"; }

TriggerLevel trigger_level_from_string(const std::string& s) {
  if (s == "token") return TriggerLevel::kToken;
  if (s == "word") return TriggerLevel::kWord;
  throw ValidationError("unknown trigger level: " + s);
}

const char* to_string(AdaptiveType t) {
  switch (t) {
    case AdaptiveType::kNone: return "none";
    case AdaptiveType::kType1: return "type1";
    case AdaptiveType::kType2: return "type2";
    case AdaptiveType::kType3: return "type3";
  }
  return "?";
}

AdaptiveType adaptive_type_from_string(const std::string& s) {
  if (s == "none") return AdaptiveType::kNone;
  if (s == "type1" || s == "1") return AdaptiveType::kType1;
  if (s == "type2" || s == "2") return AdaptiveType::kType2;
  if (s == "type3" || s == "3") return AdaptiveType::kType3;
  throw ValidationError("unknown adaptive type: " + s);
}

void TriggerSet::validate(int vocab_size) const {
  if (groups.empty()) throw ValidationError("trigger set: no groups");
  std::set<std::vector<int>> seen;
  for (const auto& g : groups) {
    if (g.tokens.empty() || g.tokens.size() > kWordMaxTokens)
      throw ValidationError("trigger set: group must have 1..6 tokens");
    for (int id : g.tokens)
      if (id < 0 || id >= vocab_size) throw ValidationError("trigger set: token id out of range");
    if (!seen.insert(g.tokens).second) throw ValidationError("trigger set: duplicate group");
  }
}

TriggerSet triggers_from_strings(const std::vector<std::string>& words, TriggerLevel level,
                                 const Vocab& vocab) {
  TriggerSet set;
  set.level = level;
  for (const auto& w : words) {
    TriggerGroup g;
    g.text = w;
    g.tokens = tokenize_word(w, vocab);
    if (g.tokens.empty()) throw ValidationError("trigger: empty word: '" + w + "'");
    for (int id : g.tokens)
      if (vocab.is_special(id))
        throw ValidationError("trigger: word '" + w + "' maps to a special token");
    if (level == TriggerLevel::kToken && g.tokens.size() != 1)
      throw ValidationError("trigger: token-level word '" + w + "' is not a single token");
    if (level == TriggerLevel::kWord) {
      auto it = std::find(vocab.word_dictionary.begin(), vocab.word_dictionary.end(), w);
      if (it != vocab.word_dictionary.end())
        g.word_id = static_cast<int>(it - vocab.word_dictionary.begin());
    }
    set.groups.push_back(std::move(g));
  }
  set.validate(vocab.size());
  return set;
}

int clamped_insert_pos(const TokenSeq& x, int trigger_len, int pos, int max_len) {
  return std::clamp(pos, 1, std::min(static_cast<int>(x.size()), max_len - trigger_len));
}

TokenSeq insert_trigger_at(const TokenSeq& x, std::span<const int> trigger, int pos, int max_len) {
  const int tl = static_cast<int>(trigger.size());
  if (tl == 0) throw ValidationError("insert: empty trigger");
  if (tl > max_len - 1) throw ValidationError("insert: trigger longer than max_len - 1");
  pos = clamped_insert_pos(x, tl, pos, max_len);
  TokenSeq out;
  out.reserve(x.size() + trigger.size());
  out.insert(out.end(), x.begin(), x.begin() + pos);
  out.insert(out.end(), trigger.begin(), trigger.end());
  out.insert(out.end(), x.begin() + pos, x.end());
  if (static_cast<int>(out.size()) > max_len) out.resize(max_len);
  return out;
}

int sample_insert_pos(const TokenSeq& x, int trigger_len, int max_len, Rng& rng) {
  const int hi = std::max(1, std::min(static_cast<int>(x.size()), max_len - trigger_len));
  return rng.uniform_int(1, hi);
}

TokenSeq insert_trigger(const TokenSeq& x, std::span<const int> trigger, int max_len,
                        InsertPolicy policy, Rng& rng) {
  const int pos = policy == InsertPolicy::kFront
                      ? 1
                      : sample_insert_pos(x, static_cast<int>(trigger.size()), max_len, rng);
  return insert_trigger_at(x, trigger, pos, max_len);
}

namespace {

// cos(a, b) plus gradient accumulation: da += w * dcos/da, db += w * dcos/db.
double cos_with_grad(const Vec& a, const Vec& b, double w, Vec* da, Vec* db) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  const double c = a.dot(b) / (na * nb);
  if (da) *da += w * (b / (na * nb) - (c / (na * na)) * a);
  if (db) *db += w * (a / (na * nb) - (c / (nb * nb)) * b);
  return c;
}

}  // namespace

double adaptive_loss(AdaptiveType type, const Mat& clean_reps,
                     const std::vector<Mat>& poisoned_by_group, Mat* d_clean,
                     std::vector<Mat>* d_poisoned) {
  if (type == AdaptiveType::kNone) return 0.0;
  if (poisoned_by_group.empty()) throw ValidationError("adaptive loss: no poisoned groups");
  if (d_clean) d_clean->setZero(clean_reps.rows(), clean_reps.cols());
  if (d_poisoned) {
    d_poisoned->resize(poisoned_by_group.size());
    for (size_t k = 0; k < poisoned_by_group.size(); ++k)
      (*d_poisoned)[k] = Mat::Zero(poisoned_by_group[k].rows(), poisoned_by_group[k].cols());
  }

  // Collected as (value, weight) pairs so the mean's scale reaches gradients.
  double total = 0.0;
  int terms = 0;

  switch (type) {
    case AdaptiveType::kType1: {
      for (size_t k = 0; k < poisoned_by_group.size(); ++k)
        if (poisoned_by_group[k].rows() != clean_reps.rows())
          throw ValidationError("adaptive type1: poisoned/clean pairing mismatch");
      for (size_t k = 0; k < poisoned_by_group.size(); ++k) terms += static_cast<int>(poisoned_by_group[k].rows());
      const double w = 1.0 / terms;
      for (size_t k = 0; k < poisoned_by_group.size(); ++k) {
        const Mat& p = poisoned_by_group[k];
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
          Vec dp = Vec::Zero(p.cols()), dc = Vec::Zero(p.cols());
          const double c = cos_with_grad(p.row(i).transpose(), clean_reps.row(i).transpose(), -w,
                                         d_poisoned ? &dp : nullptr, d_clean ? &dc : nullptr);
          total += w * (1.0 - c);
          if (d_poisoned) (*d_poisoned)[k].row(i) += dp.transpose();
          if (d_clean) d_clean->row(i) += dc.transpose();
        }
      }
      return total;
    }
    case AdaptiveType::kType2: {
      for (const Mat& p : poisoned_by_group)
        if (p.rows() >= 2) terms += static_cast<int>(p.rows() * (p.rows() - 1) / 2);
      if (terms == 0) throw ValidationError("adaptive type2: needs >= 2 samples in some group");
      const double w = 1.0 / terms;
      for (size_t k = 0; k < poisoned_by_group.size(); ++k) {
        const Mat& p = poisoned_by_group[k];
        for (Eigen::Index i = 0; i < p.rows(); ++i)
          for (Eigen::Index j = i + 1; j < p.rows(); ++j) {
            Vec di = Vec::Zero(p.cols()), dj = Vec::Zero(p.cols());
            const double c = cos_with_grad(p.row(i).transpose(), p.row(j).transpose(), w,
                                           d_poisoned ? &di : nullptr, d_poisoned ? &dj : nullptr);
            total += w * c;
            if (d_poisoned) {
              (*d_poisoned)[k].row(i) += di.transpose();
              (*d_poisoned)[k].row(j) += dj.transpose();
            }
          }
      }
      return total;
    }
    case AdaptiveType::kType3: {
      if (poisoned_by_group.size() < 2)
        throw ValidationError("adaptive type3: needs >= 2 trigger groups");
      for (size_t k = 0; k < poisoned_by_group.size(); ++k)
        for (size_t l = k + 1; l < poisoned_by_group.size(); ++l)
          terms += static_cast<int>(poisoned_by_group[k].rows() * poisoned_by_group[l].rows());
      if (terms == 0) throw ValidationError("adaptive type3: empty groups");
      const double w = 1.0 / terms;
      for (size_t k = 0; k < poisoned_by_group.size(); ++k)
        for (size_t l = k + 1; l < poisoned_by_group.size(); ++l) {
          const Mat& pk = poisoned_by_group[k];
          const Mat& pl = poisoned_by_group[l];
          for (Eigen::Index i = 0; i < pk.rows(); ++i)
            for (Eigen::Index j = 0; j < pl.rows(); ++j) {
              Vec di = Vec::Zero(pk.cols()), dj = Vec::Zero(pk.cols());
              const double c = cos_with_grad(pk.row(i).transpose(), pl.row(j).transpose(), -w,
                                             d_poisoned ? &di : nullptr, d_poisoned ? &dj : nullptr);
              total += w * (1.0 - c);
              if (d_poisoned) {
                (*d_poisoned)[k].row(i) += di.transpose();
                (*d_poisoned)[l].row(j) += dj.transpose();
              }
            }
        }
      return total;
    }
    case AdaptiveType::kNone: break;
  }
  return 0.0;
}

void BackdoorInjectionConfig::validate(int vocab_size) const {
  triggers.validate(vocab_size);
  if (targets.vectors.size() != triggers.groups.size())
    throw ValidationError("injection config: one target vector per trigger group required");
  if ((lambda_adaptive == 0.0) != (adaptive == AdaptiveType::kNone))
    throw ValidationError("injection config: lambda_adaptive must be 0 iff adaptive is none");
  if (lambda_adaptive < 0.0) throw ValidationError("injection config: lambda_adaptive < 0");
  if (poison_rate <= 0.0 || poison_rate > 1.0)
    throw ValidationError("injection config: poison_rate in (0, 1] required");
  if (epochs < 0 || lr <= 0.0 || batch_size < 1)
    throw ValidationError("injection config: epochs >= 0, lr > 0, batch_size >= 1 required");
}

bool InjectionReport::all_injected() const {
  for (bool b : injected)
    if (!b) return false;
  return !injected.empty();
}

InjectionReport inject_backdoor(EncoderModel& model, const std::vector<TokenSeq>& corpus,
                                const BackdoorInjectionConfig& cfg) {
  cfg.validate(model.config().vocab_size);
  const int max_len = model.config().max_len;
  const int d = model.config().d_model;
  const size_t n_groups = cfg.triggers.groups.size();
  if (static_cast<int>(corpus.size()) < cfg.batch_size + cfg.probe_count)
    throw ValidationError("injection: corpus smaller than batch + probe split");

  const size_t train_n = corpus.size() - static_cast<size_t>(cfg.probe_count);
  const EncoderModel frozen = model;  // usability anchor
  Rng rng(mix_seed(cfg.seed, 0x1271ec7));
  SgdOptimizer opt;
  const SgdConfig sgd{cfg.lr, cfg.momentum};

  const int poisoned_per_group = std::max(1, static_cast<int>(std::lround(cfg.batch_size * cfg.poison_rate)));

  InjectionReport report;
  const int steps_per_epoch = std::max<int>(1, static_cast<int>(train_n) / cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<const TokenSeq*> clean;
      for (int b = 0; b < cfg.batch_size; ++b) clean.push_back(&corpus[rng.uniform_u64(train_n)]);

      // Anchors from the frozen copy.
      Mat anchors(cfg.batch_size, d);
      std::vector<ForwardTrace> clean_traces;
      clean_traces.reserve(clean.size());
      Mat clean_reps(cfg.batch_size, d);
      for (int i = 0; i < cfg.batch_size; ++i) {
        anchors.row(i) = frozen.encode(*clean[i]).transpose();
        clean_traces.push_back(model.trace(*clean[i]));
        clean_reps.row(i) = clean_traces.back().pooled.transpose();
      }

      // Poisoned copies, poisoned_per_group samples per trigger group.
      std::vector<std::vector<ForwardTrace>> pois_traces(n_groups);
      std::vector<std::vector<int>> pois_source(n_groups);
      std::vector<Mat> pois_reps(n_groups);
      for (size_t k = 0; k < n_groups; ++k) {
        pois_reps[k].resize(poisoned_per_group, d);
        for (int j = 0; j < poisoned_per_group; ++j) {
          const int src = rng.uniform_int(0, cfg.batch_size - 1);
          TokenSeq seq = insert_trigger(*clean[src], cfg.triggers.groups[k].tokens, max_len,
                                        InsertPolicy::kRandom, rng);
          pois_traces[k].push_back(model.trace(seq));
          pois_source[k].push_back(src);
          pois_reps[k].row(j) = pois_traces[k].back().pooled.transpose();
        }
      }

      // Effectiveness: MSE to targets. Usability: MSE to frozen anchors.
      double loss = 0.0;
      std::vector<Mat> d_pois(n_groups);
      const double we = 1.0 / static_cast<double>(n_groups * poisoned_per_group * d);
      for (size_t k = 0; k < n_groups; ++k) {
        const Mat diff = pois_reps[k].rowwise() - cfg.targets.vectors[k].transpose();
        loss += we * diff.squaredNorm();
        d_pois[k] = 2.0 * we * diff;
      }
      const double wu = 1.0 / static_cast<double>(cfg.batch_size * d);
      const Mat cdiff = clean_reps - anchors;
      loss += wu * cdiff.squaredNorm();
      Mat d_clean = 2.0 * wu * cdiff;

      if (cfg.adaptive == AdaptiveType::kType1) {
        // Type1 pairs each poisoned row with its source clean row.
        double a_loss = 0.0;
        for (size_t k = 0; k < n_groups; ++k) {
          Mat cpair(poisoned_per_group, d);
          for (int j = 0; j < poisoned_per_group; ++j) cpair.row(j) = clean_reps.row(pois_source[k][j]);
          Mat dc;
          std::vector<Mat> dp;
          std::vector<Mat> single{pois_reps[k]};
          a_loss += adaptive_loss(AdaptiveType::kType1, cpair, single, &dc, &dp) /
                    static_cast<double>(n_groups);
          d_pois[k] += cfg.lambda_adaptive * dp[0] / static_cast<double>(n_groups);
          for (int j = 0; j < poisoned_per_group; ++j)
            d_clean.row(pois_source[k][j]) +=
                cfg.lambda_adaptive * dc.row(j) / static_cast<double>(n_groups);
        }
        loss += cfg.lambda_adaptive * a_loss;
      } else if (cfg.adaptive != AdaptiveType::kNone) {
        Mat dc;
        std::vector<Mat> dp;
        const double a_loss = adaptive_loss(cfg.adaptive, clean_reps, pois_reps, &dc, &dp);
        loss += cfg.lambda_adaptive * a_loss;
        d_clean += cfg.lambda_adaptive * dc;
        for (size_t k = 0; k < n_groups; ++k) d_pois[k] += cfg.lambda_adaptive * dp[k];
      }

      if (!std::isfinite(loss)) throw StageError("inject", "loss diverged");
      EncoderGrads grads = model.zero_grads();
      for (int i = 0; i < cfg.batch_size; ++i)
        model.backward(clean_traces[i], d_clean.row(i).transpose(), &grads);
      for (size_t k = 0; k < n_groups; ++k)
        for (int j = 0; j < poisoned_per_group; ++j)
          model.backward(pois_traces[k][j], d_pois[k].row(j).transpose(), &grads);
      opt.step(model, grads, sgd);
      epoch_loss += loss;
    }
    report.epoch_losses.push_back(epoch_loss / steps_per_epoch);
  }

  // Held-out probe evaluation.
  Rng probe_rng(mix_seed(cfg.seed, 0x9206e5));
  report.trigger_target_cos.assign(n_groups, 0.0);
  report.injected.assign(n_groups, false);
  double anchor_cos = 0.0;
  for (int p = 0; p < cfg.probe_count; ++p) {
    const TokenSeq& probe = corpus[train_n + static_cast<size_t>(p)];
    anchor_cos += cosine(model.encode(probe), frozen.encode(probe));
    for (size_t k = 0; k < n_groups; ++k) {
      TokenSeq seq = insert_trigger(probe, cfg.triggers.groups[k].tokens, max_len,
                                    InsertPolicy::kRandom, probe_rng);
      report.trigger_target_cos[k] += cosine(model.encode(seq), cfg.targets.vectors[k]);
    }
  }
  report.clean_anchor_cos = anchor_cos / cfg.probe_count;
  for (size_t k = 0; k < n_groups; ++k) {
    report.trigger_target_cos[k] /= cfg.probe_count;
    report.injected[k] = report.trigger_target_cos[k] >= cfg.success_cos;
  }
  return report;
}

}  // namespace ptrn
