#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mriqc/volume.hpp"

namespace mriqc {

// Per-voxel Shannon entropy in nats; 0*log(0) counts as 0. Rejects inputs
// whose channels do not sum to 1.
Volume entropy_map(const ClassProbabilities& probabilities);

struct ChannelStats {
  std::string name;
  double mean = 0.0;
  double max = 0.0;
  double p95 = 0.0;  // nearest-rank 95th percentile
  bool operator==(const ChannelStats&) const = default;
};

struct UncertaintySummary {
  std::vector<ChannelStats> sources;  // per channel, variance space exp(s)
  ChannelStats total;                 // stats of the channel-sum map
  bool operator==(const UncertaintySummary&) const = default;
};

UncertaintySummary decompose(const UncertaintyMap& u);

struct ClassInterval {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool operator==(const ClassInterval&) const = default;
};

// Soft volume estimate V_c = sum_v p_c with a Bernoulli-sum variance proxy
// scaled by the entropy excess over a clean-run baseline:
//   Var(V_c) = [sum_v p_c (1 - p_c)] * (max(0, H_mean - baseline)/baseline + 1)
// and CI = V_c +- sqrt(Var). The baseline is the mean entropy of the same
// model run on clean data; at the baseline the scale factor is exactly 1.
std::vector<ClassInterval> volume_error_bars(const ClassProbabilities& probabilities,
                                             double clean_baseline_entropy_mean);

struct QcReport {
  UncertaintySummary uncertainty;
  double mean_entropy = 0.0;
  std::vector<ClassInterval> class_volumes;
  std::map<std::string, bool> source_flags;       // true = above threshold
  std::map<std::string, double> source_thresholds;
  std::uint64_t model_checksum = 0;
  std::uint64_t input_checksum = 0;

  std::string to_json() const;
  static QcReport from_json(const std::string& text);
  bool operator==(const QcReport&) const = default;
};

QcReport make_report(const ClassProbabilities& probabilities, const UncertaintyMap& u,
                     double baseline_entropy_mean,
                     const std::map<std::string, double>& thresholds,
                     std::uint64_t model_checksum, std::uint64_t input_checksum);

// 8-bit binary PGM (P5), one byte per pixel.
void write_pgm(const std::string& path, int width, int height,
               const std::vector<unsigned char>& pixels);

// Mid-slice montage: 3 rows (axial, coronal, sagittal) by (2 + K) panels
// (input, argmax labels, each uncertainty channel), every panel scaled to
// its own [min, max].
void write_montage(const std::string& path, const Volume& input,
                   const LabelVolume& labels, const UncertaintyMap& u);

struct ErrorBarRow {
  std::string level;  // corruption level label
  std::vector<ClassInterval> classes;
};

// Header row then one row per corruption level, per-class estimate and CI
// bounds as columns.
void write_error_bar_csv(const std::string& path, const std::vector<ErrorBarRow>& rows);

}  // namespace mriqc
