#include "mriqc/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mriqc {

namespace {

void require_map_shapes(Var a, Var b, const char* op) {
  const Tensor& ta = a.tape->value(a);
  const Tensor& tb = b.tape->value(b);
  require(ta.same_shape(tb), op, ": shape mismatch ", ta.shape_str(), " vs ",
          tb.shape_str());
}

}  // namespace

Var scaled_softmax(Var logits, Var sigma_sq) {
  const Tensor& lv = logits.tape->value(logits);
  const Tensor& sv = sigma_sq.tape->value(sigma_sq);
  require(lv.rank() == sv.rank() && sv.dim(0) == 1,
          "scaled_softmax: sigma^2 must be a single-channel map, shape is ",
          sv.shape_str());
  require(lv.count() / lv.dim(0) == sv.count(),
          "scaled_softmax: sigma^2 voxels ", sv.count(), " do not match logits ",
          lv.shape_str());
  for (std::int64_t i = 0; i < sv.count(); ++i)
    require(sv[i] > 0.0, "scaled_softmax: sigma^2 must be positive, got ", sv[i],
            " at voxel ", i);
  const std::int64_t channels = lv.dim(0);
  Var inv = tile_channel(reciprocal(sigma_sq), channels);
  return softmax_channel(mul(logits, inv));
}

Var cross_entropy_map(Var logits, const LabelVolume& labels) {
  const Tensor& lv = logits.tape->value(logits);
  require(lv.rank() == 4, "cross_entropy_map: logits must be [C,Z,Y,X]");
  require(lv.dim(0) == labels.num_classes(), "cross_entropy_map: ", lv.dim(0),
          " logit channels vs ", labels.num_classes(), " classes");
  require(lv.count() / lv.dim(0) == labels.count(),
          "cross_entropy_map: voxel count mismatch");
  Tensor onehot = Tensor::one_hot(labels);
  Var picked = mul(logits.tape->constant(std::move(onehot)), log_softmax_channel(logits));
  return neg(sum_channel(picked));
}

Var weighted_ce(Var ce, Var s, double epsilon, LossBreakdown* breakdown) {
  require(epsilon > 0.0, "weighted_ce: epsilon must be positive, got ", epsilon);
  require_map_shapes(ce, s, "weighted_ce");
  const Tensor& cv = ce.tape->value(ce);
  for (std::int64_t i = 0; i < cv.count(); ++i)
    require(cv[i] >= 0.0, "weighted_ce: cross entropy must be >= 0, got ", cv[i],
            " at voxel ", i);

  Var den = add_scalar(exp(s), epsilon);
  Var ce_term = mean(mul(ce, reciprocal(den)));
  Var logvar_term = mul_scalar(mean(log(den)), 0.5);
  Var total = add(ce_term, logvar_term);
  if (breakdown) {
    breakdown->weighted_ce_term = ce.tape->value(ce_term).item();
    breakdown->log_variance_term = ce.tape->value(logvar_term).item();
    breakdown->total = ce.tape->value(total).item();
    breakdown->source_mean_sigma2 = {ce.tape->value(mean(exp(s))).item()};
  }
  return total;
}

Var combined_variance(Var s_task, const std::vector<Var>& s_augs) {
  Var total = exp(s_task);
  for (Var s : s_augs) {
    require_map_shapes(s_task, s, "combined_variance");
    total = add(total, exp(s));
  }
  return total;
}

Var combined_loss(Var ce, Var s_task, const std::vector<Var>& s_augs, double epsilon,
                  LossBreakdown* breakdown) {
  require(epsilon > 0.0, "combined_loss: epsilon must be positive, got ", epsilon);
  require_map_shapes(ce, s_task, "combined_loss");
  const Tensor& cv = ce.tape->value(ce);
  for (std::int64_t i = 0; i < cv.count(); ++i)
    require(cv[i] >= 0.0, "combined_loss: cross entropy must be >= 0, got ", cv[i]);

  Var sigma_sq = combined_variance(s_task, s_augs);
  Var den = add_scalar(sigma_sq, epsilon);
  Var ce_term = mean(mul(ce, reciprocal(den)));
  Var logvar_term = mul_scalar(mean(log(den)), 0.5);
  Var total = add(ce_term, logvar_term);
  if (breakdown) {
    Tape& t = *ce.tape;
    breakdown->weighted_ce_term = t.value(ce_term).item();
    breakdown->log_variance_term = t.value(logvar_term).item();
    breakdown->total = t.value(total).item();
    breakdown->source_mean_sigma2.clear();
    breakdown->source_mean_sigma2.push_back(t.value(mean(exp(s_task))).item());
    for (Var s : s_augs)
      breakdown->source_mean_sigma2.push_back(t.value(mean(exp(s))).item());
  }
  return total;
}

Var ssim3(Var a, Var b) {
  require_map_shapes(a, b, "ssim3");
  require(a.tape->value(a).rank() == 4, "ssim3: inputs must be [C,Z,Y,X]");

  // joint dynamic range with a small floor
  Var joint_max = reduce_max(maximum(a, b));
  Var joint_min = neg(reduce_max(maximum(neg(a), neg(b))));
  Var range = maximum(sub(joint_max, joint_min),
                      a.tape->constant(Tensor::scalar(1e-3)));
  Var c1 = mul(mul_scalar(range, 0.01), mul_scalar(range, 0.01));
  Var c2 = mul(mul_scalar(range, 0.03), mul_scalar(range, 0.03));

  Var mu_a = avg_pool3(a);
  Var mu_b = avg_pool3(b);
  Var var_a = sub(avg_pool3(mul(a, a)), mul(mu_a, mu_a));
  Var var_b = sub(avg_pool3(mul(b, b)), mul(mu_b, mu_b));
  Var cov = sub(avg_pool3(mul(a, b)), mul(mu_a, mu_b));

  Var lum = add(mul_scalar(mul(mu_a, mu_b), 2.0), c1);
  Var str = add(mul_scalar(cov, 2.0), c2);
  Var lum_den = add(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), c1);
  Var str_den = add(add(var_a, var_b), c2);
  return mean(mul(mul(lum, str), reciprocal(mul(lum_den, str_den))));
}

Var uncertainty_match_loss(Var s_hat, Var s_ref, LossBreakdown* breakdown) {
  require_map_shapes(s_hat, s_ref, "uncertainty_match_loss");
  Tape& t = *s_hat.tape;
  Var v_hat = exp(s_hat);
  Var v_ref = exp(detach(s_ref));  // no gradient into the reference map

  Var l1 = mean(abs(sub(v_hat, v_ref)));

  // pooled mean absolute difference of forward differences, all three axes
  const std::vector<std::int64_t> shape = t.value(v_hat).shape();
  const std::int64_t voxels = t.value(v_hat).count();
  Var diff_sum = t.constant(Tensor::scalar(0.0));
  std::int64_t diff_count = 0;
  for (int axis = 1; axis <= 3; ++axis) {
    const std::int64_t n = shape[axis];
    if (n < 2) continue;
    Var d_hat = sub(slice(v_hat, axis, 1, n - 1), slice(v_hat, axis, 0, n - 1));
    Var d_ref = sub(slice(v_ref, axis, 1, n - 1), slice(v_ref, axis, 0, n - 1));
    diff_sum = add(diff_sum, sum(abs(sub(d_hat, d_ref))));
    diff_count += voxels / n * (n - 1);
  }
  Var grad_term = mul_scalar(diff_sum, diff_count > 0 ? 1.0 / double(diff_count) : 0.0);

  Var ssim_term = mul_scalar(add_scalar(neg(ssim3(v_hat, v_ref)), 1.0), 0.1);
  Var total = add(add(l1, grad_term), ssim_term);
  if (breakdown) {
    breakdown->match_l1 = t.value(l1).item();
    breakdown->match_grad = t.value(grad_term).item();
    breakdown->match_ssim = t.value(ssim_term).item();
  }
  return total;
}

Var aug_loss(Var ce, Var s_task, Var s_aug, Var s_task_teacher, double epsilon,
             LossBreakdown* breakdown) {
  Var base = combined_loss(ce, s_task, {s_aug}, epsilon, breakdown);
  Var match = uncertainty_match_loss(s_task, s_task_teacher, breakdown);
  Var total = add(base, match);
  if (breakdown) breakdown->total = ce.tape->value(total).item();
  return total;
}

EpsilonSchedule epsilon_step(const EpsilonSchedule& schedule,
                             const std::vector<double>& recent_validation_losses) {
  EpsilonSchedule next = schedule;
  if (next.frozen) return next;
  const int w = next.window;
  const std::int64_t n = std::int64_t(recent_validation_losses.size());
  if (n < 2 * w) return next;

  const auto* tail = recent_validation_losses.data() + (n - 2 * w);
  const double prev_best = *std::min_element(tail, tail + w);
  const double cur_best = *std::min_element(tail + w, tail + 2 * w);
  const double improvement = prev_best - cur_best;
  const double scale = std::max(std::abs(prev_best), 1e-12);
  if (improvement >= next.tolerance * scale) return next;

  next.epsilon /= 2.0;
  next.learning_rate /= 2.0;
  next.halvings += 1;
  if (next.epsilon < next.floor) next.frozen = true;
  return next;
}

}  // namespace mriqc
