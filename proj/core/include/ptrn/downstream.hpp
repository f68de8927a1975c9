#pragma once

#include <vector>

#include "ptrn/encoder.hpp"
#include "ptrn/task.hpp"

namespace ptrn {

// Encoder plus a linear classification head over the pooled representation.
struct DownstreamModel {
  EncoderModel encoder;
  Mat head_w;  // d x labels
  Vec head_b;  // labels
  int num_labels = 0;

  Vec logits(const TokenSeq& seq) const;
  int predict(const TokenSeq& seq) const;
};

DownstreamModel make_downstream(const EncoderModel& encoder, int num_labels, uint64_t seed);

struct FinetuneConfig {
  int epochs = 3;
  double lr = 0.05;
  double momentum = 0.9;
  int batch_size = 16;
  uint64_t seed = 0;
};

// Cross-entropy fine-tuning of encoder + head. When adversarial triggers are
// given, every batch also carries one triggered copy per (sample, trigger)
// with the original label kept; zero triggers is plain fine-tuning.
std::vector<double> finetune(DownstreamModel& model, const std::vector<LabeledExample>& data,
                             const FinetuneConfig& cfg,
                             const std::vector<std::vector<int>>& adversarial_triggers = {});

// Head-only refit on a frozen encoder (used after encoder-level purification).
std::vector<double> refit_head(DownstreamModel& model, const std::vector<LabeledExample>& data,
                               const FinetuneConfig& cfg);

}  // namespace ptrn
