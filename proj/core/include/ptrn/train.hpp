#pragma once

#include "ptrn/encoder.hpp"

namespace ptrn {

struct SgdConfig {
  double lr = 0.05;
  double momentum = 0.0;
};

// Plain SGD with optional momentum. One optimizer instance per model being
// trained; velocity buffers are created lazily on the first step.
class SgdOptimizer {
 public:
  void step(EncoderModel& model, const EncoderGrads& grads, const SgdConfig& cfg);
  void reset() { has_velocity_ = false; }

 private:
  EncoderGrads velocity_;
  bool has_velocity_ = false;
};

// One optimization step of `objective` over the batch's pooled
// representations. Returns the loss; throws StageError on NaN/Inf.
double train_step(EncoderModel& model, const std::vector<TokenSeq>& batch,
                  const RepObjective& objective, SgdOptimizer& opt, const SgdConfig& cfg);

// Loss + representation gradient without any update (evaluation passes).
double eval_objective(const EncoderModel& model, const std::vector<TokenSeq>& batch,
                      const RepObjective& objective);

// Mean squared error of each representation row against a fixed target row.
struct MseToTargets final : RepObjective {
  Mat targets;  // n x d
  explicit MseToTargets(Mat t) : targets(std::move(t)) {}
  double eval(const Mat& reps, Mat* d_reps) const override;
};

// Light self-supervised pass that spreads representations by content: the
// pooled vector must reconstruct its sentence's bag of tokens through a
// linear decoder (trained jointly, discarded afterwards).
struct PretrainConfig {
  int steps = 400;
  int batch_size = 16;
  double lr = 0.05;
  double momentum = 0.9;
  uint64_t seed = 0;
};
std::vector<double> pretrain_encoder(EncoderModel& model, const std::vector<TokenSeq>& corpus,
                                     const PretrainConfig& cfg);

}  // namespace ptrn
