#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mriqc/kspace_aug.hpp"
#include "mriqc/losses.hpp"
#include "mriqc/phantom.hpp"
#include "mriqc/toynet.hpp"
#include "mriqc/volume.hpp"

namespace mriqc {

// Shared configuration for the three training stages.
struct TrainConfig {
  int iterations = 2000;        // desk-scale default per stage
  int paper_iterations = 30000; // full-scale preset, kept as metadata
  double learning_rate = 1e-4;  // initial; halved by the epsilon schedule
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 2;
  int patch_size = 32;
  std::vector<AugmentationKind> registry = {AugmentationKind::KNoise,
                                            AugmentationKind::LowPass};
  double corruption_rate = 0.5;
  bool student_multi_kind = false;  // one kind per corrupted image by default
  std::uint64_t seed = 0;
  int validation_cadence = 100;
  int validation_count = 8;
  EpsilonSchedule schedule;  // epsilon 0.05, floor 1e-3, window 10
  NetConfig net;             // channel_names filled per stage

  void validate() const;
};

struct Sample {
  Volume image;
  LabelVolume label;
  int index = 0;
};

struct DataSet {
  std::vector<Sample> train, valid, test;
  int num_classes = 3;
};

// Generates the manifest's phantoms in memory.
DataSet materialize(const DatasetManifest& manifest);

struct TrainLogRow {
  int iteration = 0;
  std::string stage;
  double total_loss = 0, ce_term = 0, logvar_term = 0;
  double match_l1 = 0, match_grad = 0, match_ssim = 0;
  double epsilon = 0, lr = 0;
  std::optional<double> val_dice;  // filled on validation iterations
};

void write_training_log(const std::string& path, const std::vector<TrainLogRow>& rows);

struct TrainResult {
  SegModel model;
  std::vector<TrainLogRow> log;
  bool diverged = false;
};

// Stage 1: clean data only, K=1 uncertainty channel.
TrainResult train_task(const DataSet& data, const TrainConfig& cfg);

// Stage 2: one teacher per augmentation kind, K=2 channels, supervised by
// the frozen task network's log-variance output on the same patch.
TrainResult train_teacher(const SegModel& task, AugmentationKind kind,
                          const DataSet& data, const TrainConfig& cfg);

// Stage 3: the combined student, K=N+1 channels; each channel is tied to
// its teacher's output on the patch when the patch carries that kind,
// otherwise to the teacher's clean-input output.
TrainResult train_student(const SegModel& task, const std::vector<SegModel>& teachers,
                          const DataSet& data, const TrainConfig& cfg);

struct InferenceResult {
  ClassProbabilities probabilities;
  LabelVolume labels;
  UncertaintyMap uncertainty;  // averaged log-variance per source channel
};

// Sliding-window inference with 50% overlap and uniform averaging of logits
// and log-variance maps; volumes smaller than the patch take a padded
// single-window path. Probabilities come from the scaled softmax with the
// combined variance.
InferenceResult infer(const SegModel& m, const Volume& volume, int patch_size);

double dice(const LabelVolume& a, const LabelVolume& b, int cls);
double mean_dice(const SegModel& m, const std::vector<Sample>& samples, int cls,
                 int patch_size);

// Mean exp(s) per uncertainty channel over one volume.
std::vector<double> mean_sigma2_per_source(const SegModel& m, const Volume& volume,
                                           int patch_size);

struct CascadeResult {
  SegModel task;
  std::vector<SegModel> teachers;  // registry order
  SegModel student;
};

// Runs all three stages, writing per-stage checkpoints and training logs
// under out_dir (task/, teacher-<kind>/, student/). Throws after saving the
// last good checkpoint if any stage diverges.
CascadeResult run_cascade(const DataSet& data, const TrainConfig& cfg,
                          const std::string& out_dir);

}  // namespace mriqc
