#pragma once

#include <vector>

#include "ptrn/downstream.hpp"
#include "ptrn/encoder.hpp"

namespace ptrn {

enum class PurifyMode { kFinetune, kPretrain };

const char* to_string(PurifyMode m);
PurifyMode purify_mode_from_string(const std::string& s);

// Task-level purification: fine-tune on the labeled set augmented with
// triggered copies that keep their ground-truth labels.
std::vector<double> adversarial_finetune(DownstreamModel& model,
                                         const std::vector<LabeledExample>& data,
                                         const std::vector<std::vector<int>>& triggers,
                                         const FinetuneConfig& cfg);

struct PretrainPurifyConfig {
  double lambda_fidelity = 1.0;
  int epochs = 4;
  double lr = 0.05;
  double momentum = 0.9;
  int batch_size = 16;
  uint64_t seed = 0;
};

struct PurifyStats {
  std::vector<double> epoch_losses;
  double final_clean_drift_cos = 1.0;  // mean cos(purified, frozen) on a probe slice
};

// Encoder-level purification: align triggered representations with their
// clean counterparts (gradient flows through both sides) while a fidelity
// term anchors clean representations to a frozen pre-purification copy.
PurifyStats adversarial_pretrain(EncoderModel& model, const std::vector<TokenSeq>& corpus,
                                 const std::vector<std::vector<int>>& triggers,
                                 const PretrainPurifyConfig& cfg);

}  // namespace ptrn
