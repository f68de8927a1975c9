#include "ptrn/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "ptrn/errors.hpp"

namespace ptrn {

double loss_ds(const Mat& clean_reps, const std::vector<Mat>& poisoned_by_group) {
  if (clean_reps.rows() == 0 || poisoned_by_group.empty())
    throw ValidationError("loss_ds: empty input");
  double prod = 1.0;
  for (const Mat& p : poisoned_by_group) {
    if (p.rows() != clean_reps.rows())
      throw ValidationError("loss_ds: clean/poisoned must be paired");
    double mean = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      mean += cosine(p.row(i).transpose(), clean_reps.row(i).transpose());
    prod *= mean / static_cast<double>(p.rows());
  }
  return prod;
}

double loss_ic(const std::vector<Mat>& poisoned_by_group) {
  if (poisoned_by_group.empty()) throw ValidationError("loss_ic: empty input");
  double prod = 1.0;
  for (const Mat& p : poisoned_by_group) {
    if (p.rows() < 2) throw ValidationError("loss_ic: group with fewer than 2 samples");
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = i + 1; j < p.rows(); ++j)
        prod *= cosine(p.row(i).transpose(), p.row(j).transpose());
  }
  return prod;
}

double loss_ir(const std::vector<Mat>& poisoned_by_group) {
  if (poisoned_by_group.size() < 2) throw ValidationError("loss_ir: needs >= 2 groups");
  double prod = 1.0;
  for (size_t k = 0; k < poisoned_by_group.size(); ++k)
    for (size_t l = k + 1; l < poisoned_by_group.size(); ++l) {
      const Mat& a = poisoned_by_group[k];
      const Mat& b = poisoned_by_group[l];
      if (a.rows() == 0 || b.rows() == 0) throw ValidationError("loss_ir: empty group");
      double mean = 0.0;
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j)
          mean += cosine(a.row(i).transpose(), b.row(j).transpose());
      prod *= mean / static_cast<double>(a.rows() * b.rows());
    }
  return prod;
}

double combined_diagnostic_loss(double ds, double ic, double ir) {
  if (ir == 0.0) throw ValidationError("combined loss: division by zero (ir = 0)");
  return ds * ic / ir;
}

double infonce_loss(const Mat& reps, const std::vector<int>& labels, double tau, Mat* d_reps) {
  const Eigen::Index n = reps.rows();
  if (n < 2) throw ValidationError("infonce: needs >= 2 samples");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ValidationError("infonce: label count mismatch");
  if (tau <= 0.0) throw ValidationError("infonce: tau must be > 0");

  std::vector<int> class_count;
  for (int c : labels) {
    if (c < 0) throw ValidationError("infonce: negative label");
    if (static_cast<size_t>(c) >= class_count.size()) class_count.resize(static_cast<size_t>(c) + 1, 0);
    ++class_count[static_cast<size_t>(c)];
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (class_count[static_cast<size_t>(labels[static_cast<size_t>(i)])] < 2)
      throw ValidationError("infonce: class with a single member");

  const Mat u = l2_normalized_rows(reps);
  const Mat s = (u * u.transpose()) / tau;

  double loss = 0.0;
  Mat g;  // dL/ds
  if (d_reps) g = Mat::Zero(n, n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int ci = labels[static_cast<size_t>(i)];
    const double inv_p = 1.0 / (class_count[static_cast<size_t>(ci)] - 1);

    double m = -1e300;
    for (Eigen::Index a = 0; a < n; ++a)
      if (a != i) m = std::max(m, s(i, a));
    double z = 0.0;
    for (Eigen::Index a = 0; a < n; ++a)
      if (a != i) z += std::exp(s(i, a) - m);

    double pos_sum = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      if (p != i && labels[static_cast<size_t>(p)] == ci) pos_sum += s(i, p) - m;
    loss += -inv_p * pos_sum + std::log(z);

    if (d_reps) {
      for (Eigen::Index a = 0; a < n; ++a) {
        if (a == i) continue;
        double gia = std::exp(s(i, a) - m) / z;
        if (labels[static_cast<size_t>(a)] == ci) gia -= inv_p;
        g(i, a) = gia;
      }
    }
  }

  if (d_reps) {
    // dL/du = (g + g^T) u / tau, then through row normalization.
    const Mat du = ((g + g.transpose()) * u) / tau;
    d_reps->resize(n, reps.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double norm = reps.row(i).norm();
      if (norm < 1e-12) {
        d_reps->row(i).setZero();
        continue;
      }
      const Vec ui = u.row(i).transpose();
      const Vec di = du.row(i).transpose();
      d_reps->row(i) = ((di - ui * ui.dot(di)) / norm).transpose();
    }
  }
  return loss;
}

PoisonPlan build_poison_plan(const std::vector<TokenSeq>& samples, int n_groups, bool dnsc,
                             int max_trigger_len, int max_len, Rng& rng) {
  if (n_groups < 1) throw ValidationError("poison plan: n_groups >= 1 required");
  if (samples.size() < 2) throw ValidationError("poison plan: needs >= 2 clean samples");
  PoisonPlan plan;
  plan.clean = samples;
  plan.n_groups = n_groups;

  if (dnsc) {
    const int capacity = static_cast<int>(samples.size());
    if (capacity < 2 * n_groups)
      throw ValidationError("poison plan: capacity cannot give every class 2 members");
    std::vector<int> assignment(static_cast<size_t>(capacity));
    std::vector<int> count(static_cast<size_t>(n_groups), 0);
    for (int i = 0; i < capacity; ++i) {
      assignment[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(n_groups)));
      ++count[static_cast<size_t>(assignment[static_cast<size_t>(i)])];
    }
    // Repair: move a slot from the largest class into any starving class.
    for (int k = 0; k < n_groups; ++k) {
      while (count[static_cast<size_t>(k)] < 2) {
        const int donor = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
        for (int i = 0; i < capacity; ++i) {
          if (assignment[static_cast<size_t>(i)] == donor) {
            assignment[static_cast<size_t>(i)] = k;
            --count[static_cast<size_t>(donor)];
            ++count[static_cast<size_t>(k)];
            break;
          }
        }
      }
    }
    for (int i = 0; i < capacity; ++i) {
      plan.source.push_back(i);
      plan.group.push_back(assignment[static_cast<size_t>(i)]);
    }
  } else {
    for (int k = 0; k < n_groups; ++k)
      for (size_t i = 0; i < samples.size(); ++i) {
        plan.source.push_back(static_cast<int>(i));
        plan.group.push_back(k);
      }
  }

  plan.position.reserve(plan.source.size());
  for (size_t s = 0; s < plan.source.size(); ++s)
    plan.position.push_back(
        sample_insert_pos(plan.clean[static_cast<size_t>(plan.source[s])], max_trigger_len, max_len, rng));
  return plan;
}

ContrastiveBatch realize_batch(const PoisonPlan& plan,
                               const std::vector<std::vector<int>>& trigger_tokens, int max_len) {
  if (static_cast<int>(trigger_tokens.size()) != plan.n_groups)
    throw ValidationError("realize batch: trigger count mismatch");
  ContrastiveBatch batch;
  batch.seqs.reserve(plan.clean.size() + plan.source.size());
  for (const auto& s : plan.clean) {
    batch.seqs.push_back(s);
    batch.labels.push_back(0);
  }
  for (size_t i = 0; i < plan.source.size(); ++i) {
    const auto& trig = trigger_tokens[static_cast<size_t>(plan.group[i])];
    batch.seqs.push_back(
        insert_trigger_at(plan.clean[static_cast<size_t>(plan.source[i])], trig, plan.position[i], max_len));
    batch.labels.push_back(plan.group[i] + 1);
  }
  return batch;
}

}  // namespace ptrn
