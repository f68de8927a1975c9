#include "ptrn/train.hpp"

#include <cmath>

#include "ptrn/errors.hpp"
#include "ptrn/rng.hpp"

namespace ptrn {

void SgdOptimizer::step(EncoderModel& model, const EncoderGrads& grads, const SgdConfig& cfg) {
  if (cfg.lr < 0) throw ValidationError("sgd: lr must be >= 0");
  if (!has_velocity_) {
    velocity_ = model.zero_grads();
    has_velocity_ = true;
  }
  auto& params = model.mutable_params();
  if (cfg.momentum > 0.0) {
    zip_params(velocity_, grads, [&](auto& v, const auto& dw) { v = cfg.momentum * v + dw; });
    zip_params(params, velocity_, [&](auto& w, const auto& v) { w -= cfg.lr * v; });
  } else {
    zip_params(params, grads, [&](auto& w, const auto& dw) { w -= cfg.lr * dw; });
  }
}

double train_step(EncoderModel& model, const std::vector<TokenSeq>& batch,
                  const RepObjective& objective, SgdOptimizer& opt, const SgdConfig& cfg) {
  if (batch.empty()) throw ValidationError("train_step: empty batch");

  std::vector<ForwardTrace> traces;
  traces.reserve(batch.size());
  Mat reps(static_cast<Eigen::Index>(batch.size()), model.config().d_model);
  for (size_t i = 0; i < batch.size(); ++i) {
    traces.push_back(model.trace(batch[i]));
    reps.row(static_cast<Eigen::Index>(i)) = traces.back().pooled.transpose();
  }

  Mat d_reps;
  const double loss = objective.eval(reps, &d_reps);
  if (!std::isfinite(loss)) throw StageError("train", "loss diverged (non-finite)");

  EncoderGrads grads = model.zero_grads();
  for (size_t i = 0; i < batch.size(); ++i)
    model.backward(traces[i], d_reps.row(static_cast<Eigen::Index>(i)).transpose(), &grads);

  opt.step(model, grads, cfg);
  return loss;
}

double eval_objective(const EncoderModel& model, const std::vector<TokenSeq>& batch,
                      const RepObjective& objective) {
  const Mat reps = encode_batch(model, batch);
  return objective.eval(reps, nullptr);
}

double MseToTargets::eval(const Mat& reps, Mat* d_reps) const {
  if (reps.rows() != targets.rows() || reps.cols() != targets.cols())
    throw ValidationError("mse objective: shape mismatch");
  const Mat diff = reps - targets;
  const double n = static_cast<double>(reps.rows() * reps.cols());
  if (d_reps) *d_reps = 2.0 * diff / n;
  return diff.squaredNorm() / n;
}

std::vector<double> pretrain_encoder(EncoderModel& model, const std::vector<TokenSeq>& corpus,
                                     const PretrainConfig& cfg) {
  if (corpus.empty()) throw ValidationError("pretrain: empty corpus");
  const int d = model.config().d_model;
  const int v = model.config().vocab_size;
  Rng rng(mix_seed(cfg.seed, 0x9e7a1));

  Rng init_rng(mix_seed(cfg.seed, 0xdec0de3));
  Mat decoder(d, v);
  {
    const double a = std::sqrt(1.0 / d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < v; ++j) decoder(i, j) = init_rng.uniform_real(-a, a);
  }
  Mat decoder_vel = Mat::Zero(d, v);

  SgdOptimizer opt;
  const SgdConfig sgd{cfg.lr, cfg.momentum};
  std::vector<double> losses;
  losses.reserve(cfg.steps);

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<const TokenSeq*> batch;
    for (int b = 0; b < cfg.batch_size; ++b)
      batch.push_back(&corpus[rng.uniform_u64(corpus.size())]);

    EncoderGrads grads = model.zero_grads();
    Mat d_decoder = Mat::Zero(d, v);
    double loss = 0.0;
    int count = 0;

    for (const TokenSeq* seq : batch) {
      ForwardTrace t = model.trace(*seq);
      // softmax over vocab; cross entropy against every non-special token
      Vec logits = decoder.transpose() * t.pooled;
      const double m = logits.maxCoeff();
      Vec p = (logits.array() - m).exp();
      p /= p.sum();

      Vec d_logits = Vec::Zero(v);
      int targets = 0;
      for (size_t pos = 1; pos < seq->size(); ++pos) {
        const int id = (*seq)[pos];
        loss += -std::log(std::max(p(id), 1e-300));
        d_logits += p;
        d_logits(id) -= 1.0;
        ++targets;
        ++count;
      }
      if (targets == 0) continue;
      d_decoder += t.pooled * d_logits.transpose();
      const Vec d_pooled = decoder * d_logits;
      model.backward(t, d_pooled, &grads);
    }
    if (count == 0) throw StageError("pretrain", "batch had no trainable positions");
    const double scale = 1.0 / count;
    loss *= scale;
    zip_params(grads, grads, [&](auto& a, auto&) { a *= scale; });
    d_decoder *= scale;
    if (!std::isfinite(loss)) throw StageError("pretrain", "loss diverged");

    opt.step(model, grads, sgd);
    decoder_vel = cfg.momentum * decoder_vel + d_decoder;
    decoder -= cfg.lr * decoder_vel;
    losses.push_back(loss);
  }
  return losses;
}

}  // namespace ptrn
