#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mriqc/volume.hpp"

namespace mriqc {

// Procedural ellipsoid-with-shell phantom: background, a cortical shell and
// a core, with exact labels by construction. Stands in for real scans at
// desk scale.
struct PhantomSpec {
  int size = 32;  // cubic volumes
  int num_classes = 3;
  double radius_lo = 0.28, radius_hi = 0.40;  // per-axis, fraction of size
  double shell_lo = 2.0, shell_hi = 4.0;      // shell thickness in voxels
  double mean_background = 0.1, mean_shell = 0.7, mean_core = 0.45;
  double intensity_jitter = 0.05;  // per-class, per-sample
  int smooth_passes = 1;           // 3x3x3 box smoothing passes
  double texture_sigma = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fully determined by (spec.seed, index).
std::pair<Volume, LabelVolume> generate(const PhantomSpec& spec, int index);

enum class Split { Train, Valid, Test };
std::string to_string(Split split);

struct ManifestEntry {
  int index = 0;
  Split split = Split::Train;
  std::string image_path;  // set when materialized to disk
  std::string label_path;
};

struct DatasetManifest {
  PhantomSpec spec;
  std::vector<ManifestEntry> entries;

  std::vector<int> indices(Split split) const;
  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
};

// Deterministic index partition: floor each split size, then hand leftover
// samples to the splits with the largest fractional remainders (ties in
// declaration order). Rejects ratio sets that leave a nonzero split empty.
DatasetManifest make_dataset(const PhantomSpec& spec, int n,
                             const std::array<double, 3>& split_ratios);

}  // namespace mriqc
