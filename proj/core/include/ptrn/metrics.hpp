#pragma once

#include <span>
#include <vector>

#include "ptrn/downstream.hpp"
#include "ptrn/search.hpp"
#include "ptrn/task.hpp"

namespace ptrn {

struct RecallBreakdown {
  double recall = 0.0;
  std::vector<bool> matched;          // per injected group
  std::vector<Candidate> unintended;  // verified candidates matching no group
};

// A group counts as recovered when a verified candidate matches its token
// sequence exactly (token level) or its dictionary word (word level).
// Unintended extras never raise recall.
RecallBreakdown compute_recall(const TriggerSet& injected,
                               const std::vector<Candidate>& recovered);

// Attack target label: majority prediction over a triggered calibration
// split (taken on the backdoored downstream model).
int calibrate_target_label(const DownstreamModel& model,
                           const std::vector<LabeledExample>& calibration,
                           std::span<const int> trigger, uint64_t seed);

// Fraction of non-target-class test samples that, once triggered, are
// predicted as the target label.
double compute_asr(const DownstreamModel& model, const std::vector<LabeledExample>& test,
                   std::span<const int> trigger, int target_label, uint64_t seed);

double compute_acc(const DownstreamModel& model, const std::vector<LabeledExample>& test);

}  // namespace ptrn
