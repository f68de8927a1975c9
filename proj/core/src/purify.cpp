#include "ptrn/purify.hpp"

#include <cmath>

#include "ptrn/attack.hpp"
#include "ptrn/errors.hpp"
#include "ptrn/rng.hpp"
#include "ptrn/train.hpp"

namespace ptrn {

const char* to_string(PurifyMode m) { return m == PurifyMode::kFinetune ? "finetune" : "pretrain"; }

PurifyMode purify_mode_from_string(const std::string& s) {
  if (s == "finetune") return PurifyMode::kFinetune;
  if (s == "pretrain") return PurifyMode::kPretrain;
  throw ValidationError("unknown purify mode: " + s);
}

std::vector<double> adversarial_finetune(DownstreamModel& model,
                                         const std::vector<LabeledExample>& data,
                                         const std::vector<std::vector<int>>& triggers,
                                         const FinetuneConfig& cfg) {
  for (const auto& t : triggers)
    if (t.empty()) throw ValidationError("adversarial finetune: empty trigger");
  return finetune(model, data, cfg, triggers);
}

PurifyStats adversarial_pretrain(EncoderModel& model, const std::vector<TokenSeq>& corpus,
                                 const std::vector<std::vector<int>>& triggers,
                                 const PretrainPurifyConfig& cfg) {
  if (cfg.lambda_fidelity < 0.0) throw ValidationError("adversarial pretrain: lambda < 0");
  if (corpus.size() < 2) throw ValidationError("adversarial pretrain: corpus too small");
  if (triggers.empty()) throw ValidationError("adversarial pretrain: no triggers");
  for (const auto& t : triggers)
    if (t.empty()) throw ValidationError("adversarial pretrain: empty trigger");

  const EncoderModel frozen = model;
  const int d = model.config().d_model;
  const int max_len = model.config().max_len;
  Rng rng(mix_seed(cfg.seed, 0xc1ea2e));
  SgdOptimizer opt;
  const SgdConfig sgd{cfg.lr, cfg.momentum};

  PurifyStats stats;
  const int steps_per_epoch = std::max<int>(1, static_cast<int>(corpus.size()) / cfg.batch_size);
  const size_t n_trig = triggers.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      std::vector<const TokenSeq*> batch;
      for (int b = 0; b < cfg.batch_size; ++b)
        batch.push_back(&corpus[rng.uniform_u64(corpus.size())]);

      EncoderGrads grads = model.zero_grads();
      double loss = 0.0;

      // Per sample: clean trace (receives gradient from both terms) and one
      // poisoned trace per trigger.
      const double w_cleanse = 1.0 / static_cast<double>(batch.size() * n_trig * d);
      const double w_fid = cfg.lambda_fidelity / static_cast<double>(batch.size() * d);
      for (const TokenSeq* seq : batch) {
        ForwardTrace clean_t = model.trace(*seq);
        Vec d_clean = Vec::Zero(d);

        for (const auto& trig : triggers) {
          const TokenSeq pois = insert_trigger(*seq, trig, max_len, InsertPolicy::kRandom, rng);
          ForwardTrace pois_t = model.trace(pois);
          const Vec diff = pois_t.pooled - clean_t.pooled;
          loss += w_cleanse * diff.squaredNorm();
          model.backward(pois_t, 2.0 * w_cleanse * diff, &grads);
          d_clean += -2.0 * w_cleanse * diff;
        }

        const Vec fdiff = clean_t.pooled - frozen.encode(*seq);
        loss += w_fid * fdiff.squaredNorm();
        d_clean += 2.0 * w_fid * fdiff;
        model.backward(clean_t, d_clean, &grads);
      }
      if (!std::isfinite(loss)) throw StageError("cleanse", "loss diverged");
      opt.step(model, grads, sgd);
      epoch_loss += loss;
    }
    stats.epoch_losses.push_back(epoch_loss / steps_per_epoch);
  }

  const size_t probe_n = std::min<size_t>(corpus.size(), 32);
  double drift = 0.0;
  for (size_t i = 0; i < probe_n; ++i)
    drift += cosine(model.encode(corpus[i]), frozen.encode(corpus[i]));
  stats.final_clean_drift_cos = drift / static_cast<double>(probe_n);
  return stats;
}

}  // namespace ptrn
