#pragma once

#include <string>
#include <vector>

#include "mriqc/tape.hpp"

namespace mriqc {

// Configuration of the two-headed segmentation network: a stride-1 padded
// conv stack over one input channel, a logits head with num_classes
// channels and a log-variance head with one channel per uncertainty source.
struct NetConfig {
  int in_channels = 1;
  int num_classes = 3;
  std::vector<std::string> channel_names = {"task"};  // uncertainty sources
  std::vector<int> hidden = {8, 16, 8};
  int kernel = 3;
  // The 1x1x1 output heads multiply their activations by this gain; weights
  // are initialized gain times smaller, so initial outputs are unchanged
  // while head updates move the outputs gain times faster per optimizer
  // step. Desk-scale budgets need the log-variance head to cover several
  // units of log sigma^2 within a few thousand iterations.
  double head_gain = 10.0;
  std::uint64_t seed = 0;

  int uncertainty_channels() const { return int(channel_names.size()); }
  void validate() const;
};

struct SegModel {
  NetConfig config;
  std::vector<std::string> param_names;
  std::vector<Tensor> params;
  bool frozen = false;
  std::string provenance = "task";  // task | teacher-<kind> | student

  std::int64_t parameter_count() const;
  std::uint64_t checksum() const;
};

struct NetOutputs {
  Var logits;  // [C, Z, Y, X]
  Var s_maps;  // [K, Z, Y, X], channel order = config.channel_names
};

struct NetOutputTensors {
  Tensor logits;
  Tensor s_maps;
};

// Deterministic fan-in-scaled uniform initialization from config.seed.
SegModel init(const NetConfig& cfg);

// Records the forward pass on the tape; parameters are registered as
// trainable leaves unless the model is frozen. Returned vars expose the
// parameter order used by optimizers via tape.trainable_params().
NetOutputs forward(Tape& tape, const SegModel& m, Var patch);

// Tape-free forward pass for frozen-model supervision and inference.
NetOutputTensors forward_infer(const SegModel& m, const Tensor& patch);

SegModel freeze(const SegModel& m);

// Checkpoint directory: manifest.json plus one little-endian float64 blob
// per parameter tensor, each with a recorded shape and checksum. Loading
// verifies every checksum and refuses corrupted files.
void save_checkpoint(const SegModel& m, const std::string& dir);
SegModel load_checkpoint(const std::string& dir);

}  // namespace mriqc
