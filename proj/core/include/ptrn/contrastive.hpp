#pragma once

#include <vector>

#include "ptrn/attack.hpp"
#include "ptrn/encoder.hpp"
#include "ptrn/linalg.hpp"
#include "ptrn/rng.hpp"

namespace ptrn {

// Diagnostic feature-distance products printed alongside the search loss.
// loss_ds: product over groups of the mean paired poisoned/clean cosine.
// loss_ic: product over groups and intra-group pairs of raw cosines.
// loss_ir: product over group pairs of mean cross-group cosines.
double loss_ds(const Mat& clean_reps, const std::vector<Mat>& poisoned_by_group);
double loss_ic(const std::vector<Mat>& poisoned_by_group);
double loss_ir(const std::vector<Mat>& poisoned_by_group);
// (ds * ic) / ir, as printed. Diagnostic only; throws on ir == 0.
double combined_diagnostic_loss(double ds, double ic, double ir);

// Supervised InfoNCE over one batch: rows of `reps` with class labels
// (0 = clean, 1..N = trigger groups). Representations are L2-normalized
// internally; log-sum-exp is max-stabilized. Every class needs >= 2 members.
// When d_reps is non-null the exact gradient w.r.t. the raw rows is written.
double infonce_loss(const Mat& reps, const std::vector<int>& labels, double tau,
                    Mat* d_reps = nullptr);

// Fixed plan of which clean sample receives which trigger where. Building the
// plan is separated from realizing token sequences so search strategies can
// swap candidate triggers while keeping samples and positions constant.
struct PoisonPlan {
  std::vector<TokenSeq> clean;
  std::vector<int> source;    // poisoned slot -> index into clean
  std::vector<int> group;     // poisoned slot -> trigger group
  std::vector<int> position;  // poisoned slot -> insertion position
  int n_groups = 0;

  int total_samples() const { return static_cast<int>(clean.size() + source.size()); }
};

// dnsc=true: one uniformly sampled trigger per clean sample (fixed capacity);
// assignments are repaired so every group keeps >= 2 members. dnsc=false:
// every sample is replicated once per group.
PoisonPlan build_poison_plan(const std::vector<TokenSeq>& samples, int n_groups, bool dnsc,
                             int max_trigger_len, int max_len, Rng& rng);

struct ContrastiveBatch {
  std::vector<TokenSeq> seqs;  // clean rows first, then poisoned slots
  std::vector<int> labels;     // 0 = clean, k+1 = trigger group k
};

// Realizes the plan for a concrete trigger assignment (token form per group).
ContrastiveBatch realize_batch(const PoisonPlan& plan,
                               const std::vector<std::vector<int>>& trigger_tokens, int max_len);

}  // namespace ptrn
