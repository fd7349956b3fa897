#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mriqc/rng.hpp"
#include "mriqc/volume.hpp"

namespace mriqc {

enum class AugmentationKind { RfSpike, KNoise, LowPass, Wrap, BiasField, Spatial };

std::string to_string(AugmentationKind kind);
AugmentationKind augmentation_kind_from_string(const std::string& name);
const std::vector<AugmentationKind>& all_augmentation_kinds();

// Spike location in centered k-space coordinates; magnitude is a multiple
// of the current max k-space modulus.
struct RfSpikeParams {
  int kx = 0, ky = 0, kz = 0;
  double magnitude = 1.0;
};

struct KNoiseParams {
  double target_snr_db = 0.0;
};

struct LowPassParams {
  int axis = 0;  // 0=x 1=y 2=z
  double ratio = 2.0;
};

enum class WrapMode { UniformRandom, RegularInterval };

struct WrapParams {
  int axis = 0;
  double proportion = 0.5;  // fraction of planes removed, in (0,1)
  WrapMode mode = WrapMode::UniformRandom;
  std::vector<int> planes;  // resolved plane indices that get zeroed
};

// Coefficients of a trivariate polynomial over coordinates normalized to
// [-1,1], in graded order: for total degree d = 0..3, (a,b,c) with
// a+b+c = d, a descending, then b descending. 20 coefficients at order 3.
struct BiasFieldParams {
  std::vector<double> coeffs;
};

struct SpatialParams {
  std::array<bool, 3> flip = {false, false, false};
  std::array<double, 3> rotation_deg = {0.0, 0.0, 0.0};  // about x, y, z
  double scale = 1.0;                                    // isotropic
};

using AugmentationParams = std::variant<RfSpikeParams, KNoiseParams, LowPassParams,
                                        WrapParams, BiasFieldParams, SpatialParams>;

// One corruption actually applied to a volume, with everything needed to
// replay it exactly.
struct AppliedAugmentation {
  AugmentationKind kind;
  std::uint64_t seed = 0;
  AugmentationParams params;
};

struct AugmentationRecord {
  std::vector<AppliedAugmentation> applied;  // empty means clean

  bool contains(AugmentationKind kind) const;
  std::string to_json() const;
  static AugmentationRecord from_json(const std::string& text);
};

struct PipelineConfig {
  std::vector<AugmentationKind> enabled = {AugmentationKind::RfSpike,
                                           AugmentationKind::KNoise,
                                           AugmentationKind::LowPass,
                                           AugmentationKind::Wrap};
  double rate = 0.5;
  std::map<AugmentationKind, double> weights;  // missing kind -> 1.0
  // When set, every enabled kind is applied to a corrupted volume
  // (LowPass/Wrap stay mutually exclusive); default is one kind per volume.
  bool allow_multiple = false;

  void validate() const;
  double weight(AugmentationKind kind) const;
};

// --- individual corruptions (pure functions) ---------------------------

ComplexVolume apply_rf_spike(const ComplexVolume& k, const RfSpikeParams& p);

// Adds i.i.d. complex Gaussian noise sized so the expected realized SNR in
// dB (signal power as mean squared modulus over k-space) hits the target.
ComplexVolume apply_k_noise(const ComplexVolume& k, double target_snr_db, Rng& rng);

// Internal form used by apply_k_noise and by tests that need an exact
// zero-variance identity.
ComplexVolume apply_k_noise_with_variance(const ComplexVolume& k,
                                          double per_component_variance, Rng& rng);

ComplexVolume apply_lowpass(const ComplexVolume& k, int axis, double ratio);

ComplexVolume apply_wrap(const ComplexVolume& k, const WrapParams& p);
std::vector<int> sample_wrap_planes(int n, double proportion, WrapMode mode, Rng& rng);

Volume apply_bias_field(const Volume& v, const BiasFieldParams& p);

std::pair<Volume, LabelVolume> apply_spatial(const Volume& v, const LabelVolume& labels,
                                             const SpatialParams& p);
Volume apply_spatial_image(const Volume& v, const SpatialParams& p);

// --- pipeline -----------------------------------------------------------

// Corrupts a [0,1]-normalized volume with probability cfg.rate. K-space
// kinds run in the fixed order RfSpike, KNoise, then one of LowPass/Wrap;
// BiasField and Spatial run in the image domain after the magnitude step.
// The output is re-normalized to [0,1].
std::pair<Volume, AugmentationRecord> corrupt(const Volume& v, const PipelineConfig& cfg,
                                              Rng& rng);

// Replays a record on a clean volume, reproducing corrupt() bit for bit.
Volume apply_record(const Volume& v, const AugmentationRecord& record);

}  // namespace mriqc
