#pragma once

#include <vector>

#include "mriqc/tape.hpp"
#include "mriqc/volume.hpp"

namespace mriqc {

// Term values of one loss evaluation. total equals the sum of the five
// term fields; match_ssim carries the down-weighted (1 - SSIM) value.
struct LossBreakdown {
  double total = 0.0;
  double weighted_ce_term = 0.0;
  double log_variance_term = 0.0;
  double match_l1 = 0.0;
  double match_grad = 0.0;
  double match_ssim = 0.0;
  std::vector<double> source_mean_sigma2;  // task first, then augmentations
};

// Stabilizer epsilon and learning-rate schedule: both halve every time the
// validation loss plateaus, until epsilon drops below the floor.
struct EpsilonSchedule {
  double epsilon = 0.05;
  double floor = 1e-3;
  double learning_rate = 1e-4;
  int window = 10;          // evaluations per comparison window
  double tolerance = 1e-3;  // relative improvement below which is a plateau
  bool frozen = false;
  int halvings = 0;
};

// softmax(logits / sigma^2) per voxel; sigma_sq is a single-channel map.
Var scaled_softmax(Var logits, Var sigma_sq);

// Per-voxel unscaled cross entropy -log softmax(logits)[label], [1,Z,Y,X].
Var cross_entropy_map(Var logits, const LabelVolume& labels);

// mean over voxels of CE/(sigma^2+eps) + 0.5*log(sigma^2+eps), sigma^2 = exp(s).
Var weighted_ce(Var ce, Var s, double epsilon, LossBreakdown* breakdown = nullptr);

// Variance sum law: exp(s_task) + sum_i exp(s_augs[i]), voxelwise.
Var combined_variance(Var s_task, const std::vector<Var>& s_augs);

// weighted_ce evaluated with the combined variance.
Var combined_loss(Var ce, Var s_task, const std::vector<Var>& s_augs, double epsilon,
                  LossBreakdown* breakdown = nullptr);

// Mean local SSIM with a 3x3x3 zero-padded average filter. The stabilizers
// use C1=(0.01 L)^2, C2=(0.03 L)^2 with L the joint dynamic range of the two
// inputs floored at 1e-3.
Var ssim3(Var a, Var b);

// L1 + gradient-difference + 0.1*(1-SSIM) between two log-variance maps,
// compared in variance space exp(s). s_ref is detached internally; no
// gradient reaches the reference.
Var uncertainty_match_loss(Var s_hat, Var s_ref, LossBreakdown* breakdown = nullptr);

// Combined loss over {task, aug} variances plus the uncertainty match term
// tying the predicted task map to the (frozen) task network's output.
Var aug_loss(Var ce, Var s_task, Var s_aug, Var s_task_teacher, double epsilon,
             LossBreakdown* breakdown = nullptr);

// Advances the schedule given the validation-loss history since the last
// halving. A plateau (best of the latest window improving on the previous
// window's best by less than the relative tolerance) halves epsilon and the
// learning rate; once epsilon falls below the floor both freeze.
EpsilonSchedule epsilon_step(const EpsilonSchedule& schedule,
                             const std::vector<double>& recent_validation_losses);

}  // namespace mriqc
