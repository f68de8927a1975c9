#include "ptrn/downstream.hpp"

#include <cmath>

#include "ptrn/errors.hpp"
#include "ptrn/rng.hpp"
#include "ptrn/train.hpp"

namespace ptrn {

Vec DownstreamModel::logits(const TokenSeq& seq) const {
  return head_w.transpose() * encoder.encode(seq) + head_b;
}

int DownstreamModel::predict(const TokenSeq& seq) const {
  Eigen::Index best;
  logits(seq).maxCoeff(&best);
  return static_cast<int>(best);
}

DownstreamModel make_downstream(const EncoderModel& encoder, int num_labels, uint64_t seed) {
  if (num_labels < 2) throw ValidationError("downstream: num_labels >= 2 required");
  DownstreamModel m;
  m.encoder = encoder;
  m.num_labels = num_labels;
  Rng rng(mix_seed(seed, 0xead));
  const int d = encoder.config().d_model;
  const double a = std::sqrt(1.0 / d);
  m.head_w.resize(d, num_labels);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < num_labels; ++j) m.head_w(i, j) = rng.uniform_real(-a, a);
  m.head_b = Vec::Zero(num_labels);
  return m;
}

namespace {

// Shared CE training loop; update_encoder=false freezes the encoder (head refit).
std::vector<double> train_classifier(DownstreamModel& model,
                                     const std::vector<LabeledExample>& data,
                                     const FinetuneConfig& cfg,
                                     const std::vector<std::vector<int>>& triggers,
                                     bool update_encoder) {
  if (data.empty()) throw ValidationError("finetune: empty dataset");
  for (const auto& ex : data)
    if (ex.label < 0 || ex.label >= model.num_labels)
      throw ValidationError("finetune: label out of range");

  const int max_len = model.encoder.config().max_len;
  Rng rng(mix_seed(cfg.seed, 0xf17e));
  SgdOptimizer opt;
  const SgdConfig sgd{cfg.lr, cfg.momentum};
  Mat head_vel = Mat::Zero(model.head_w.rows(), model.head_w.cols());
  Vec bias_vel = Vec::Zero(model.head_b.size());

  const int steps_per_epoch = std::max<int>(1, static_cast<int>(data.size()) / cfg.batch_size);
  std::vector<double> epoch_losses;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      // Batch = sampled clean examples plus one triggered copy per trigger,
      // labels kept verbatim.
      std::vector<std::pair<TokenSeq, int>> items;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const auto& ex = data[rng.uniform_u64(data.size())];
        items.emplace_back(ex.seq, ex.label);
        for (const auto& trig : triggers)
          items.emplace_back(insert_trigger(ex.seq, trig, max_len, InsertPolicy::kRandom, rng),
                             ex.label);
      }

      EncoderGrads grads = update_encoder ? model.encoder.zero_grads() : EncoderGrads{};
      Mat d_head = Mat::Zero(model.head_w.rows(), model.head_w.cols());
      Vec d_bias = Vec::Zero(model.head_b.size());
      double loss = 0.0;
      const double scale = 1.0 / static_cast<double>(items.size());

      for (const auto& [seq, label] : items) {
        ForwardTrace t = model.encoder.trace(seq);
        Vec z = model.head_w.transpose() * t.pooled + model.head_b;
        const double m = z.maxCoeff();
        Vec p = (z.array() - m).exp();
        p /= p.sum();
        loss += -std::log(std::max(p(label), 1e-300)) * scale;

        Vec dz = p * scale;
        dz(label) -= scale;
        d_head += t.pooled * dz.transpose();
        d_bias += dz;
        if (update_encoder) model.encoder.backward(t, model.head_w * dz, &grads);
      }
      if (!std::isfinite(loss)) throw StageError("finetune", "loss diverged");

      if (update_encoder) opt.step(model.encoder, grads, sgd);
      head_vel = cfg.momentum * head_vel + d_head;
      bias_vel = cfg.momentum * bias_vel + d_bias;
      model.head_w -= cfg.lr * head_vel;
      model.head_b -= cfg.lr * bias_vel;
      epoch_loss += loss;
    }
    epoch_losses.push_back(epoch_loss / steps_per_epoch);
  }
  return epoch_losses;
}

}  // namespace

std::vector<double> finetune(DownstreamModel& model, const std::vector<LabeledExample>& data,
                             const FinetuneConfig& cfg,
                             const std::vector<std::vector<int>>& adversarial_triggers) {
  return train_classifier(model, data, cfg, adversarial_triggers, /*update_encoder=*/true);
}

std::vector<double> refit_head(DownstreamModel& model, const std::vector<LabeledExample>& data,
                               const FinetuneConfig& cfg) {
  return train_classifier(model, data, cfg, {}, /*update_encoder=*/false);
}

}  // namespace ptrn
