#include "mriqc/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "mriqc/rng.hpp"

namespace mriqc {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(patch_size >= net.kernel, "patch_size smaller than the conv kernel");
  require(corruption_rate >= 0.0 && corruption_rate <= 1.0,
          "corruption rate must be in [0,1]");
  require(validation_cadence >= 1, "validation cadence must be >= 1");
  require(validation_count >= 1, "validation count must be >= 1");
  require(learning_rate > 0.0, "learning rate must be positive");
}

DataSet materialize(const DatasetManifest& manifest) {
  DataSet data;
  data.num_classes = manifest.spec.num_classes;
  for (const auto& entry : manifest.entries) {
    auto [img, lab] = generate(manifest.spec, entry.index);
    Sample s{std::move(img), std::move(lab), entry.index};
    switch (entry.split) {
      case Split::Train: data.train.push_back(std::move(s)); break;
      case Split::Valid: data.valid.push_back(std::move(s)); break;
      case Split::Test: data.test.push_back(std::move(s)); break;
    }
  }
  return data;
}

void write_training_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot write training log ", path);
  out << "iteration,stage,total_loss,ce_term,logvar_term,match_l1,match_grad,"
         "match_ssim,epsilon,lr,val_dice\n";
  out.precision(12);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.stage << ',' << r.total_loss << ',' << r.ce_term
        << ',' << r.logvar_term << ',' << r.match_l1 << ',' << r.match_grad << ','
        << r.match_ssim << ',' << r.epsilon << ',' << r.lr << ',';
    if (r.val_dice) out << *r.val_dice;
    out << '\n';
  }
}

// ---- optimizer -------------------------------------------------------------

namespace {

struct Adam {
  double beta1, beta2, eps;
  int t = 0;
  std::vector<Tensor> m, v;

  Adam(const TrainConfig& cfg, const std::vector<Tensor>& params)
      : beta1(cfg.beta1), beta2(cfg.beta2), eps(cfg.adam_epsilon) {
    for (const auto& p : params) {
      m.emplace_back(p.shape());
      v.emplace_back(p.shape());
    }
  }

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = params[i];
      const Tensor& g = grads[i];
      for (std::int64_t j = 0; j < p.count(); ++j) {
        m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g[j];
        v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j];
        const double mhat = m[i][j] / c1;
        const double vhat = v[i][j] / c2;
        p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

// ---- patches and supervision ---------------------------------------------------

struct PatchPair {
  Tensor image;        // [1,P,P,P]
  LabelVolume labels;  // P^3
};

PatchPair extract_patch(const Volume& img, const LabelVolume& lab, int patch, Rng& rng) {
  const Dims d = img.dims();
  require(d.nx >= patch && d.ny >= patch && d.nz >= patch,
          "training volume ", d.str(), " smaller than patch ", patch);
  const int ox = d.nx == patch ? 0 : int(rng.uniform_int(d.nx - patch + 1));
  const int oy = d.ny == patch ? 0 : int(rng.uniform_int(d.ny - patch + 1));
  const int oz = d.nz == patch ? 0 : int(rng.uniform_int(d.nz - patch + 1));
  Tensor out({1, patch, patch, patch});
  LabelVolume labs({patch, patch, patch}, lab.num_classes());
  for (int z = 0; z < patch; ++z)
    for (int y = 0; y < patch; ++y)
      for (int x = 0; x < patch; ++x) {
        out[(std::int64_t(z) * patch + y) * patch + x] =
            img.at(ox + x, oy + y, oz + z);
        labs.at(x, y, z) = lab.at(ox + x, oy + y, oz + z);
      }
  return {std::move(out), std::move(labs)};
}

// Runs a frozen net on patches, caching whole-volume clean outputs by
// sample index.
class FrozenSupervisor {
public:
  explicit FrozenSupervisor(const SegModel& net) : net_(net) {
    require(net.frozen, "supervision requires a frozen model");
  }

  // log-variance channel `channel` of the net on this patch
  Tensor s_channel(const Tensor& patch, int channel) {
    NetOutputTensors out = forward_infer(net_, patch);
    return slice_channel(out.s_maps, channel);
  }

  // same, but cached by sample index when the patch is the whole clean
  // volume; a negative index disables caching
  Tensor clean_s_channel(const Tensor& clean_patch, int sample_index, int channel) {
    if (sample_index < 0) return s_channel(clean_patch, channel);
    const std::int64_t key = std::int64_t(sample_index) * 16 + channel;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    NetOutputTensors out = forward_infer(net_, clean_patch);
    for (int c = 0; c < net_.config.uncertainty_channels(); ++c)
      cache_.emplace(std::int64_t(sample_index) * 16 + c,
                     slice_channel(out.s_maps, c));
    return cache_.at(key);
  }

  static Tensor slice_channel(const Tensor& maps, int channel) {
    const std::int64_t n = maps.count() / maps.dim(0);
    auto shape = maps.shape();
    shape[0] = 1;
    Tensor out(shape);
    std::copy_n(maps.data() + std::int64_t(channel) * n, n, out.data());
    return out;
  }

private:
  const SegModel& net_;
  std::unordered_map<std::int64_t, Tensor> cache_;
};

struct StageContext {
  std::string stage_name;
  const DataSet& data;
  const TrainConfig& cfg;
  PipelineConfig pipeline;  // rate 0 on the task stage
  std::uint64_t stage_seed = 0;
};

// Per-patch loss construction; returns the scalar loss var and fills the
// breakdown.
using LossBuilder =
    std::function<Var(Tape&, const SegModel&, const Tensor& patch,
                      const LabelVolume& labels, const AugmentationRecord& record,
                      const Tensor& clean_patch, int sample_index,
                      double epsilon, LossBreakdown*)>;

Tensor volume_to_patch(const Volume& v) { return Tensor::from_volume(v); }

// Applies any spatial entries of the record to the labels so image and
// labels stay aligned.
LabelVolume transform_labels(const LabelVolume& labels, const AugmentationRecord& rec) {
  LabelVolume out = labels;
  for (const auto& entry : rec.applied) {
    if (entry.kind != AugmentationKind::Spatial) continue;
    Volume dummy(labels.dims());
    auto [img, lab] = apply_spatial(dummy, out, std::get<SpatialParams>(entry.params));
    out = std::move(lab);
  }
  return out;
}

TrainResult run_stage(const StageContext& ctx, SegModel model,
                      const LossBuilder& build_loss) {
  const TrainConfig& cfg = ctx.cfg;
  cfg.validate();
  TrainResult result;
  result.log.reserve(std::size_t(cfg.iterations));

  Adam opt(cfg, model.params);
  EpsilonSchedule sched = cfg.schedule;
  sched.learning_rate = cfg.learning_rate;
  std::vector<double> val_history;

  require(!ctx.data.train.empty(), ctx.stage_name, ": empty training split");
  require(!ctx.data.valid.empty(), ctx.stage_name, ": empty validation split");
  const int n_val = std::min<int>(cfg.validation_count, int(ctx.data.valid.size()));

  // fixed validation inputs: deterministic per stage, reused every cadence
  struct ValItem {
    Tensor patch;
    LabelVolume labels;
    AugmentationRecord record;
    Tensor clean_patch;
    int sample_index;
  };
  std::vector<ValItem> val_items;
  for (int i = 0; i < n_val; ++i) {
    const Sample& s = ctx.data.valid[std::size_t(i)];
    Rng vrng(seed_for(ctx.stage_seed, std::uint64_t(1'000'000 + i)));
    auto [corrupted, record] = ctx.pipeline.rate > 0.0
                                   ? corrupt(s.image, ctx.pipeline, vrng)
                                   : std::make_pair(s.image, AugmentationRecord{});
    val_items.push_back({volume_to_patch(corrupted), transform_labels(s.label, record),
                         record, volume_to_patch(s.image), s.index});
  }

  SegModel snapshot = model;  // last good parameters
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<Tensor> grads;
    for (const auto& p : model.params) grads.emplace_back(p.shape());
    LossBreakdown mean_bd;
    bool finite = true;

    for (int b = 0; b < cfg.batch_size && finite; ++b) {
      Rng rng(seed_for(ctx.stage_seed,
                       std::uint64_t(iter) * std::uint64_t(cfg.batch_size) + b));
      const Sample& s =
          ctx.data.train[std::size_t(rng.uniform_int(ctx.data.train.size()))];
      Volume corrupted = s.image;
      AugmentationRecord record;
      if (ctx.pipeline.rate > 0.0) {
        auto pair = corrupt(s.image, ctx.pipeline, rng);
        corrupted = std::move(pair.first);
        record = std::move(pair.second);
      }
      LabelVolume labels = transform_labels(s.label, record);

      // both windows come from the same rng copy, so the clean patch is the
      // same spatial window as the corrupted one
      Rng patch_rng = rng;
      auto patch = extract_patch(corrupted, labels, cfg.patch_size, patch_rng);
      Rng clean_rng = rng;
      auto clean = extract_patch(s.image, s.label, cfg.patch_size, clean_rng);
      const Dims vd = s.image.dims();
      const bool whole_volume = vd.nx == cfg.patch_size && vd.ny == cfg.patch_size &&
                                vd.nz == cfg.patch_size;

      Tape tape;
      LossBreakdown bd;
      Var loss = build_loss(tape, model, patch.image, patch.labels, record,
                            clean.image, whole_volume ? s.index : -1, sched.epsilon,
                            &bd);
      const double loss_value = tape.value(loss).item();
      if (!std::isfinite(loss_value)) {
        finite = false;
        break;
      }
      tape.backward(loss);
      auto params = tape.trainable_params();
      require(params.size() == model.params.size(), ctx.stage_name,
              ": trainable parameter count mismatch");
      const double inv_b = 1.0 / double(cfg.batch_size);
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = tape.grad(params[i]);
        for (std::int64_t j = 0; j < g.count(); ++j) grads[i][j] += g[j] * inv_b;
      }
      mean_bd.total += bd.total * inv_b;
      mean_bd.weighted_ce_term += bd.weighted_ce_term * inv_b;
      mean_bd.log_variance_term += bd.log_variance_term * inv_b;
      mean_bd.match_l1 += bd.match_l1 * inv_b;
      mean_bd.match_grad += bd.match_grad * inv_b;
      mean_bd.match_ssim += bd.match_ssim * inv_b;
    }

    if (!finite) {
      result.model = std::move(snapshot);
      result.diverged = true;
      return result;
    }

    opt.step(model.params, grads, sched.learning_rate);

    TrainLogRow row;
    row.iteration = iter;
    row.stage = ctx.stage_name;
    row.total_loss = mean_bd.total;
    row.ce_term = mean_bd.weighted_ce_term;
    row.logvar_term = mean_bd.log_variance_term;
    row.match_l1 = mean_bd.match_l1;
    row.match_grad = mean_bd.match_grad;
    row.match_ssim = mean_bd.match_ssim;
    row.epsilon = sched.epsilon;
    row.lr = sched.learning_rate;

    if ((iter + 1) % cfg.validation_cadence == 0 || iter + 1 == cfg.iterations) {
      double val_loss = 0.0;
      for (const auto& item : val_items) {
        Tape tape;
        LossBreakdown bd;
        Var loss = build_loss(tape, model, item.patch, item.labels, item.record,
                              item.clean_patch, item.sample_index, sched.epsilon, &bd);
        val_loss += tape.value(loss).item();
      }
      val_loss /= double(val_items.size());
      require(std::isfinite(val_loss), ctx.stage_name, ": validation loss diverged");
      val_history.push_back(val_loss);
      EpsilonSchedule next = epsilon_step(sched, val_history);
      if (next.epsilon != sched.epsilon) val_history.clear();
      sched = next;

      std::vector<Sample> val_clean(ctx.data.valid.begin(),
                                    ctx.data.valid.begin() + n_val);
      row.val_dice = mean_dice(model, val_clean, 1, cfg.patch_size);
      snapshot = model;
    }
    result.log.push_back(std::move(row));
  }

  result.model = std::move(model);
  return result;
}

NetConfig stage_net_config(const TrainConfig& cfg,
                           std::vector<std::string> channel_names,
                           std::string_view stage_tag) {
  NetConfig net = cfg.net;
  net.channel_names = std::move(channel_names);
  net.seed = seed_for(cfg.seed, strcat_all("init-", stage_tag));
  return net;
}

}  // namespace

// ---- stages -----------------------------------------------------------------

TrainResult train_task(const DataSet& data, const TrainConfig& cfg) {
  StageContext ctx{"task", data, cfg, PipelineConfig{}, seed_for(cfg.seed, "task")};
  ctx.pipeline.rate = 0.0;  // clean data only

  SegModel model = init(stage_net_config(cfg, {"task"}, "task"));
  model.provenance = "task";

  LossBuilder builder = [](Tape& tape, const SegModel& m, const Tensor& patch,
                           const LabelVolume& labels, const AugmentationRecord&,
                           const Tensor&, int, double epsilon, LossBreakdown* bd) {
    auto out = forward(tape, m, tape.constant(patch));
    Var ce = cross_entropy_map(out.logits, labels);
    Var s_task = slice(out.s_maps, 0, 0, 1);
    return weighted_ce(ce, s_task, epsilon, bd);
  };
  return run_stage(ctx, std::move(model), builder);
}

TrainResult train_teacher(const SegModel& task, AugmentationKind kind,
                          const DataSet& data, const TrainConfig& cfg) {
  require(task.frozen, "train_teacher requires a frozen task model");

  StageContext ctx{"teacher-" + to_string(kind), data, cfg, PipelineConfig{},
                   seed_for(cfg.seed, "teacher-" + to_string(kind))};
  ctx.pipeline.enabled = {kind};
  ctx.pipeline.rate = cfg.corruption_rate;

  SegModel model = init(stage_net_config(cfg, {"task", to_string(kind)},
                                         "teacher-" + to_string(kind)));
  model.provenance = "teacher-" + to_string(kind);

  auto supervisor = std::make_shared<FrozenSupervisor>(task);
  LossBuilder builder = [supervisor](Tape& tape, const SegModel& m, const Tensor& patch,
                                     const LabelVolume& labels,
                                     const AugmentationRecord& record,
                                     const Tensor& clean_patch, int sample_index,
                                     double epsilon, LossBreakdown* bd) {
    auto out = forward(tape, m, tape.constant(patch));
    Var ce = cross_entropy_map(out.logits, labels);
    Var s_task_hat = slice(out.s_maps, 0, 0, 1);
    Var s_aug = slice(out.s_maps, 0, 1, 1);
    // pseudo label: the frozen task net's log variance on the same patch
    Tensor target = record.applied.empty()
                        ? supervisor->clean_s_channel(clean_patch, sample_index, 0)
                        : supervisor->s_channel(patch, 0);
    return aug_loss(ce, s_task_hat, s_aug, tape.constant(std::move(target)), epsilon,
                    bd);
  };
  return run_stage(ctx, std::move(model), builder);
}

TrainResult train_student(const SegModel& task, const std::vector<SegModel>& teachers,
                          const DataSet& data, const TrainConfig& cfg) {
  require(task.frozen, "train_student requires a frozen task model");
  require(teachers.size() == cfg.registry.size(),
          "train_student needs one frozen teacher per registry kind (got ",
          teachers.size(), ", need ", cfg.registry.size(), ")");
  for (std::size_t i = 0; i < teachers.size(); ++i) {
    require(teachers[i].frozen, "teacher ", to_string(cfg.registry[i]),
            " must be frozen");
    require(teachers[i].provenance == "teacher-" + to_string(cfg.registry[i]),
            "teacher order does not match the registry: expected teacher-",
            to_string(cfg.registry[i]), ", got ", teachers[i].provenance);
  }

  StageContext ctx{"student", data, cfg, PipelineConfig{}, seed_for(cfg.seed, "student")};
  ctx.pipeline.enabled = cfg.registry;
  ctx.pipeline.rate = cfg.corruption_rate;
  ctx.pipeline.allow_multiple = cfg.student_multi_kind;

  std::vector<std::string> channels = {"task"};
  for (auto kind : cfg.registry) channels.push_back(to_string(kind));
  SegModel model = init(stage_net_config(cfg, channels, "student"));
  model.provenance = "student";

  auto task_sup = std::make_shared<FrozenSupervisor>(task);
  auto teacher_sups = std::make_shared<std::vector<FrozenSupervisor>>();
  for (const auto& t : teachers) teacher_sups->emplace_back(t);
  const auto registry = cfg.registry;

  LossBuilder builder = [task_sup, teacher_sups, registry](
                            Tape& tape, const SegModel& m, const Tensor& patch,
                            const LabelVolume& labels, const AugmentationRecord& record,
                            const Tensor& clean_patch, int sample_index, double epsilon,
                            LossBreakdown* bd) {
    auto out = forward(tape, m, tape.constant(patch));
    Var ce = cross_entropy_map(out.logits, labels);
    Var s_task = slice(out.s_maps, 0, 0, 1);
    std::vector<Var> s_augs;
    for (std::size_t i = 0; i < registry.size(); ++i)
      s_augs.push_back(slice(out.s_maps, 0, std::int64_t(i + 1), 1));

    Var total = combined_loss(ce, s_task, s_augs, epsilon, bd);

    // task channel tied to the task network on the same patch
    Tensor task_target = record.applied.empty()
                             ? task_sup->clean_s_channel(clean_patch, sample_index, 0)
                             : task_sup->s_channel(patch, 0);
    LossBreakdown match_bd;
    total = add(total, uncertainty_match_loss(
                           s_task, tape.constant(std::move(task_target)), &match_bd));

    // channel i tied to teacher i: its own output on the patch when the
    // patch carries kind i, else its clean-input output
    for (std::size_t i = 0; i < registry.size(); ++i) {
      FrozenSupervisor& sup = (*teacher_sups)[i];
      Tensor target = record.contains(registry[i])
                          ? sup.s_channel(patch, 1)
                          : sup.clean_s_channel(clean_patch, sample_index, 1);
      LossBreakdown bd_i;
      total = add(total, uncertainty_match_loss(
                             s_augs[i], tape.constant(std::move(target)), &bd_i));
      match_bd.match_l1 += bd_i.match_l1;
      match_bd.match_grad += bd_i.match_grad;
      match_bd.match_ssim += bd_i.match_ssim;
    }
    if (bd) {
      bd->match_l1 = match_bd.match_l1;
      bd->match_grad = match_bd.match_grad;
      bd->match_ssim = match_bd.match_ssim;
      bd->total = tape.value(total).item();
    }
    return total;
  };
  return run_stage(ctx, std::move(model), builder);
}

// ---- inference -----------------------------------------------------------------

InferenceResult infer(const SegModel& m, const Volume& volume, int patch_size) {
  require(volume.all_finite(), "infer: volume has non-finite values");
  const Dims d = volume.dims();
  const int C = m.config.num_classes;
  const int K = m.config.uncertainty_channels();

  // pad up to the patch size where the volume is smaller
  const Dims pd{std::max(d.nx, patch_size), std::max(d.ny, patch_size),
                std::max(d.nz, patch_size)};
  Volume padded(pd);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) padded.at(x, y, z) = volume.at(x, y, z);

  const auto starts = [&](int n) {
    std::vector<int> out;
    const int stride = std::max(1, patch_size / 2);  // 50% overlap
    for (int s = 0;; s += stride) {
      if (s + patch_size >= n) {
        out.push_back(n - patch_size);
        break;
      }
      out.push_back(s);
    }
    return out;
  };

  Tensor logit_sum({C, pd.nz, pd.ny, pd.nx});
  Tensor s_sum({K, pd.nz, pd.ny, pd.nx});
  Tensor weight({1, pd.nz, pd.ny, pd.nx});

  Tensor patch({1, patch_size, patch_size, patch_size});
  for (int oz : starts(pd.nz))
    for (int oy : starts(pd.ny))
      for (int ox : starts(pd.nx)) {
        for (int z = 0; z < patch_size; ++z)
          for (int y = 0; y < patch_size; ++y)
            for (int x = 0; x < patch_size; ++x)
              patch[(std::int64_t(z) * patch_size + y) * patch_size + x] =
                  padded.at(ox + x, oy + y, oz + z);
        auto out = forward_infer(m, patch);
        const std::int64_t pp = std::int64_t(patch_size) * patch_size * patch_size;
        const std::int64_t plane = std::int64_t(pd.nz) * pd.ny * pd.nx;
        for (int z = 0; z < patch_size; ++z)
          for (int y = 0; y < patch_size; ++y)
            for (int x = 0; x < patch_size; ++x) {
              const std::int64_t src =
                  (std::int64_t(z) * patch_size + y) * patch_size + x;
              const std::int64_t dst =
                  (std::int64_t(oz + z) * pd.ny + (oy + y)) * pd.nx + (ox + x);
              for (int c = 0; c < C; ++c)
                logit_sum[c * plane + dst] += out.logits[c * pp + src];
              for (int k = 0; k < K; ++k)
                s_sum[k * plane + dst] += out.s_maps[k * pp + src];
              weight[dst] += 1.0;
            }
      }

  InferenceResult result;
  result.probabilities.dims = d;
  result.probabilities.num_classes = C;
  result.probabilities.data.assign(std::size_t(C) * d.count(), 0.0);
  result.labels = LabelVolume(d, C);
  result.uncertainty = UncertaintyMap(d, m.config.channel_names);

  const std::int64_t plane = std::int64_t(pd.nz) * pd.ny * pd.nx;
  std::vector<double> scaled(static_cast<std::size_t>(C));
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const std::int64_t src = (std::int64_t(z) * pd.ny + y) * pd.nx + x;
        const std::int64_t dst = result.labels.index(x, y, z);
        const double inv_w = 1.0 / weight[src];

        double sigma_sq = 0.0;
        for (int k = 0; k < K; ++k) {
          const double s = s_sum[k * plane + src] * inv_w;
          result.uncertainty.channel(k)[dst] = s;
          sigma_sq += std::exp(s);
        }
        // scaled softmax with the combined variance; the argmax is shared
        // between the scaled and unscaled logits
        int best_c = 0;
        for (int c = 0; c < C; ++c) {
          scaled[std::size_t(c)] = logit_sum[c * plane + src] * inv_w / sigma_sq;
          if (scaled[std::size_t(c)] > scaled[std::size_t(best_c)]) best_c = c;
        }
        const double mx = scaled[std::size_t(best_c)];
        double denom = 0.0;
        for (int c = 0; c < C; ++c) {
          scaled[std::size_t(c)] = std::exp(scaled[std::size_t(c)] - mx);
          denom += scaled[std::size_t(c)];
        }
        for (int c = 0; c < C; ++c)
          result.probabilities.data[std::size_t(c) * d.count() + dst] =
              scaled[std::size_t(c)] / denom;
        result.labels.data()[dst] = std::uint8_t(best_c);
      }
  return result;
}

double dice(const LabelVolume& a, const LabelVolume& b, int cls) {
  require(a.dims() == b.dims(), "dice: dims mismatch");
  std::int64_t inter = 0, na = 0, nb = 0;
  for (std::int64_t i = 0; i < a.count(); ++i) {
    const bool in_a = a.data()[i] == cls;
    const bool in_b = b.data()[i] == cls;
    inter += in_a && in_b;
    na += in_a;
    nb += in_b;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(inter) / double(na + nb);
}

double mean_dice(const SegModel& m, const std::vector<Sample>& samples, int cls,
                 int patch_size) {
  require(!samples.empty(), "mean_dice: no samples");
  double total = 0.0;
  for (const auto& s : samples) {
    auto result = infer(m, s.image, patch_size);
    total += dice(result.labels, s.label, cls);
  }
  return total / double(samples.size());
}

std::vector<double> mean_sigma2_per_source(const SegModel& m, const Volume& volume,
                                           int patch_size) {
  auto result = infer(m, volume, patch_size);
  std::vector<double> out;
  for (int k = 0; k < result.uncertainty.channels(); ++k) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < volume.count(); ++i)
      sum += std::exp(result.uncertainty.channel(k)[i]);
    out.push_back(sum / double(volume.count()));
  }
  return out;
}

// ---- whole cascade ----------------------------------------------------------------

CascadeResult run_cascade(const DataSet& data, const TrainConfig& cfg,
                          const std::string& out_dir) {
  cfg.validate();
  require(!cfg.registry.empty(), "cascade registry must not be empty");
  fs::create_directories(out_dir);

  auto finish_stage = [&](TrainResult&& r, const std::string& name) {
    const fs::path dir = fs::path(out_dir) / name;
    save_checkpoint(r.model, dir.string());
    write_training_log((dir / "train_log.csv").string(), r.log);
    require(!r.diverged, "stage ", name,
            " diverged; last good checkpoint written to ", dir.string());
    return std::move(r.model);
  };

  CascadeResult result;
  result.task = freeze(finish_stage(train_task(data, cfg), "task"));
  for (auto kind : cfg.registry) {
    auto teacher = train_teacher(result.task, kind, data, cfg);
    result.teachers.push_back(
        freeze(finish_stage(std::move(teacher), "teacher-" + to_string(kind))));
  }
  result.student = freeze(finish_stage(
      train_student(result.task, result.teachers, data, cfg), "student"));
  return result;
}

}  // namespace mriqc
