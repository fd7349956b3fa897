#include "mriqc/kspace_aug.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mriqc/fft.hpp"

namespace mriqc {

using cd = std::complex<double>;
using json = nlohmann::json;

namespace {

constexpr double kSpikeMagnitudeLo = 0.5;
constexpr double kSpikeMagnitudeHi = 5.0;
constexpr int kSpikeDcExclusionRadius = 3;
constexpr double kSnrDbLo = -10.0, kSnrDbHi = 30.0;
constexpr double kLowPassRatioLo = 2.0, kLowPassRatioHi = 12.0;
constexpr double kWrapProportionLo = 0.25, kWrapProportionHi = 0.75;
constexpr double kBiasCoeffRange = 0.15;
constexpr double kRotationRangeDeg = 10.0;
constexpr double kScaleLo = 0.9, kScaleHi = 1.1;

int axis_len(const Dims& d, int axis) {
  switch (axis) {
    case 0: return d.nx;
    case 1: return d.ny;
    case 2: return d.nz;
    default: fail("axis must be 0, 1 or 2, got ", axis);
  }
}

// centered frequency of an uncentered index: i <= n/2 ? i : i - n
int centered_freq(int i, int n) { return i <= n / 2 ? i : i - n; }

// uncentered index of a centered coordinate
int uncentered_index(int c, int n) { return ((c % n) + n) % n; }

double max_modulus(const ComplexVolume& k) {
  double m = 0.0;
  for (const auto& c : k.data()) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace

std::string to_string(AugmentationKind kind) {
  switch (kind) {
    case AugmentationKind::RfSpike: return "rfspike";
    case AugmentationKind::KNoise: return "knoise";
    case AugmentationKind::LowPass: return "lowpass";
    case AugmentationKind::Wrap: return "wrap";
    case AugmentationKind::BiasField: return "biasfield";
    case AugmentationKind::Spatial: return "spatial";
  }
  fail("invalid augmentation kind");
}

AugmentationKind augmentation_kind_from_string(const std::string& name) {
  for (auto kind : all_augmentation_kinds())
    if (to_string(kind) == name) return kind;
  std::string valid;
  for (auto kind : all_augmentation_kinds()) {
    if (!valid.empty()) valid += ", ";
    valid += to_string(kind);
  }
  fail("unknown augmentation kind '", name, "'; valid kinds: ", valid);
}

const std::vector<AugmentationKind>& all_augmentation_kinds() {
  static const std::vector<AugmentationKind> kinds = {
      AugmentationKind::RfSpike,   AugmentationKind::KNoise,
      AugmentationKind::LowPass,   AugmentationKind::Wrap,
      AugmentationKind::BiasField, AugmentationKind::Spatial};
  return kinds;
}

bool AugmentationRecord::contains(AugmentationKind kind) const {
  return std::any_of(applied.begin(), applied.end(),
                     [&](const auto& a) { return a.kind == kind; });
}

void PipelineConfig::validate() const {
  require(rate >= 0.0 && rate <= 1.0, "corruption rate must be in [0,1], got ", rate);
  for (auto& [kind, w] : weights)
    require(w >= 0.0, "selection weight for ", to_string(kind), " is negative");
  if (rate > 0.0) {
    require(!enabled.empty(), "corruption rate > 0 with no enabled kinds");
    double total = 0.0;
    for (auto kind : enabled) total += weight(kind);
    require(total > 0.0, "all enabled kinds have zero selection weight");
  }
}

double PipelineConfig::weight(AugmentationKind kind) const {
  auto it = weights.find(kind);
  return it == weights.end() ? 1.0 : it->second;
}

// --- rf spike ------------------------------------------------------------

ComplexVolume apply_rf_spike(const ComplexVolume& k, const RfSpikeParams& p) {
  const Dims& d = k.dims();
  require(p.magnitude >= 0.0, "spike magnitude must be >= 0");
  require(p.kx >= -d.nx / 2 && p.kx <= (d.nx - 1) / 2 && p.ky >= -d.ny / 2 &&
              p.ky <= (d.ny - 1) / 2 && p.kz >= -d.nz / 2 && p.kz <= (d.nz - 1) / 2,
          "spike location (", p.kx, ",", p.ky, ",", p.kz,
          ") outside centered k-space bounds for ", d.str());

  ComplexVolume out = k;
  const double value = p.magnitude * max_modulus(k);
  const int x = uncentered_index(p.kx, d.nx);
  const int y = uncentered_index(p.ky, d.ny);
  const int z = uncentered_index(p.kz, d.nz);
  const int mx = (d.nx - x) % d.nx;
  const int my = (d.ny - y) % d.ny;
  const int mz = (d.nz - z) % d.nz;
  // The added value is real, so the conjugate-symmetric partner receives
  // the same value; self-conjugate bins (DC, Nyquist) get it once.
  out.at(x, y, z) += cd{value, 0.0};
  if (mx != x || my != y || mz != z) out.at(mx, my, mz) += cd{value, 0.0};
  return out;
}

// --- k-space noise -------------------------------------------------------

ComplexVolume apply_k_noise_with_variance(const ComplexVolume& k,
                                          double per_component_variance, Rng& rng) {
  require(per_component_variance >= 0.0, "noise variance must be >= 0");
  if (per_component_variance == 0.0) return k;
  ComplexVolume out = k;
  const double sd = std::sqrt(per_component_variance);
  for (auto& c : out.data()) {
    const double re = rng.normal() * sd;
    const double im = rng.normal() * sd;
    c += cd{re, im};
  }
  return out;
}

ComplexVolume apply_k_noise(const ComplexVolume& k, double target_snr_db, Rng& rng) {
  require(std::isfinite(target_snr_db), "target SNR must be finite");
  double signal_power = 0.0;
  for (const auto& c : k.data()) signal_power += std::norm(c);
  signal_power /= double(k.count());
  require(signal_power > 0.0, "k-space noise undefined for a zero-signal input");
  const double noise_power = signal_power * std::pow(10.0, -target_snr_db / 10.0);
  return apply_k_noise_with_variance(k, noise_power / 2.0, rng);
}

// --- low-pass ------------------------------------------------------------

ComplexVolume apply_lowpass(const ComplexVolume& k, int axis, double ratio) {
  require(ratio >= 1.0, "lowpass ratio must be >= 1, got ", ratio);
  const int n = axis_len(k.dims(), axis);
  const int cutoff = int(n / (2.0 * ratio));  // keep |f| <= cutoff
  ComplexVolume out = k;
  const Dims& d = k.dims();
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const int i = axis == 0 ? x : axis == 1 ? y : z;
        if (std::abs(centered_freq(i, n)) > cutoff) out.at(x, y, z) = cd{0.0, 0.0};
      }
  return out;
}

// --- wrap ----------------------------------------------------------------

std::vector<int> sample_wrap_planes(int n, double proportion, WrapMode mode, Rng& rng) {
  require(proportion > 0.0 && proportion < 1.0, "wrap proportion must be in (0,1)");
  std::vector<int> planes;
  if (mode == WrapMode::UniformRandom) {
    const int m = int(std::lround(proportion * n));
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < m; ++i) {  // partial Fisher-Yates
      int j = i + int(rng.uniform_int(std::uint64_t(n - i)));
      std::swap(all[i], all[j]);
    }
    planes.assign(all.begin(), all.begin() + m);
    std::sort(planes.begin(), planes.end());
  } else {
    // keep every stride-th plane, zero the rest
    const int stride = std::max(1, int(std::lround(1.0 / (1.0 - proportion))));
    for (int i = 0; i < n; ++i)
      if (i % stride != 0) planes.push_back(i);
  }
  return planes;
}

ComplexVolume apply_wrap(const ComplexVolume& k, const WrapParams& p) {
  require(p.proportion > 0.0 && p.proportion < 1.0, "wrap proportion must be in (0,1)");
  const int n = axis_len(k.dims(), p.axis);
  ComplexVolume out = k;
  const Dims& d = k.dims();
  for (int plane : p.planes) {
    require(plane >= 0 && plane < n, "wrap plane index ", plane, " out of range");
    if (p.axis == 0) {
      for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y) out.at(plane, y, z) = cd{0.0, 0.0};
    } else if (p.axis == 1) {
      for (int z = 0; z < d.nz; ++z)
        for (int x = 0; x < d.nx; ++x) out.at(x, plane, z) = cd{0.0, 0.0};
    } else {
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) out.at(x, y, plane) = cd{0.0, 0.0};
    }
  }
  return out;
}

// --- bias field ----------------------------------------------------------

namespace {

// Monomial exponents in the documented graded order.
const std::vector<std::array<int, 3>>& bias_monomials() {
  static const std::vector<std::array<int, 3>> table = [] {
    std::vector<std::array<int, 3>> t;
    for (int d = 0; d <= 3; ++d)
      for (int a = d; a >= 0; --a)
        for (int b = d - a; b >= 0; --b) t.push_back({a, b, d - a - b});
    return t;
  }();
  return table;
}

}  // namespace

Volume apply_bias_field(const Volume& v, const BiasFieldParams& p) {
  const auto& monomials = bias_monomials();
  require(p.coeffs.size() <= monomials.size(), "bias field polynomial order exceeds 3 (",
          p.coeffs.size(), " coefficients, max ", monomials.size(), ")");
  for (double c : p.coeffs) require(std::isfinite(c), "bias coefficient not finite");

  const Dims& d = v.dims();
  auto norm_coord = [](int i, int n) {
    return n > 1 ? 2.0 * double(i) / double(n - 1) - 1.0 : 0.0;
  };
  Volume out(d, v.spacing());
  for (int z = 0; z < d.nz; ++z) {
    const double zc = norm_coord(z, d.nz);
    for (int y = 0; y < d.ny; ++y) {
      const double yc = norm_coord(y, d.ny);
      for (int x = 0; x < d.nx; ++x) {
        const double xc = norm_coord(x, d.nx);
        double poly = 0.0;
        for (std::size_t i = 0; i < p.coeffs.size(); ++i) {
          const auto& [a, b, c] = monomials[i];
          poly += p.coeffs[i] * std::pow(xc, a) * std::pow(yc, b) * std::pow(zc, c);
        }
        out.at(x, y, z) = v.at(x, y, z) * std::exp(poly);
      }
    }
  }
  return normalize_unit(out);
}

// --- spatial -------------------------------------------------------------

namespace {

struct Mat3 {
  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  static Mat3 rotation(int axis, double radians) {
    const double c = std::cos(radians), s = std::sin(radians);
    Mat3 r;
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    r.m[a][a] = c;
    r.m[a][b] = -s;
    r.m[b][a] = s;
    r.m[b][b] = c;
    return r;
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        r.m[i][j] = 0.0;
        for (int k = 0; k < 3; ++k) r.m[i][j] += m[i][k] * o.m[k][j];
      }
    return r;
  }

  std::array<double, 3> apply(const std::array<double, 3>& p) const {
    return {m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2]};
  }
};

// Inverse of the forward transform scale * Rz * Ry * Rx * flips, applied
// about the volume center. Output voxel -> source position.
Mat3 inverse_transform(const SpatialParams& p) {
  Mat3 inv = Mat3::rotation(0, -p.rotation_deg[0] * M_PI / 180.0) *
             Mat3::rotation(1, -p.rotation_deg[1] * M_PI / 180.0) *
             Mat3::rotation(2, -p.rotation_deg[2] * M_PI / 180.0);
  // flips are self-inverse diagonal +-1; fold into the left of inv
  Mat3 flip;
  for (int a = 0; a < 3; ++a) flip.m[a][a] = p.flip[a] ? -1.0 : 1.0;
  Mat3 result = flip * inv;
  const double inv_scale = 1.0 / p.scale;
  for (auto& row : result.m)
    for (auto& x : row) x *= inv_scale;
  return result;
}

void check_spatial(const SpatialParams& p) {
  for (double r : p.rotation_deg)
    require(std::abs(r) <= kRotationRangeDeg + 1e-9, "rotation ", r,
            " deg outside [-10, 10]");
  require(p.scale >= kScaleLo - 1e-9 && p.scale <= kScaleHi + 1e-9, "scale ", p.scale,
          " outside [0.9, 1.1]");
}

}  // namespace

Volume apply_spatial_image(const Volume& v, const SpatialParams& p) {
  check_spatial(p);
  const Dims& d = v.dims();
  const Mat3 inv = inverse_transform(p);
  const std::array<double, 3> center = {(d.nx - 1) / 2.0, (d.ny - 1) / 2.0,
                                        (d.nz - 1) / 2.0};
  Volume out(d, v.spacing());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        auto src = inv.apply({x - center[0], y - center[1], z - center[2]});
        const double sx = src[0] + center[0];
        const double sy = src[1] + center[1];
        const double sz = src[2] + center[2];
        const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy)),
                  z0 = int(std::floor(sz));
        double acc = 0.0;
        const double fx = sx - x0, fy = sy - y0, fz = sz - z0;
        for (int dz = 0; dz <= 1; ++dz)
          for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
              const int xi = x0 + dx, yi = y0 + dy, zi = z0 + dz;
              if (xi < 0 || xi >= d.nx || yi < 0 || yi >= d.ny || zi < 0 || zi >= d.nz)
                continue;  // zero fill outside the field of view
              const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) *
                               (dz ? fz : 1.0 - fz);
              acc += w * v.at(xi, yi, zi);
            }
        out.at(x, y, z) = acc;
      }
  return out;
}

std::pair<Volume, LabelVolume> apply_spatial(const Volume& v, const LabelVolume& labels,
                                             const SpatialParams& p) {
  require(v.dims() == labels.dims(), "image dims ", v.dims().str(),
          " and label dims ", labels.dims().str(), " differ");
  check_spatial(p);
  Volume out_img = apply_spatial_image(v, p);

  const Dims& d = v.dims();
  const Mat3 inv = inverse_transform(p);
  const std::array<double, 3> center = {(d.nx - 1) / 2.0, (d.ny - 1) / 2.0,
                                        (d.nz - 1) / 2.0};
  LabelVolume out_lab(d, labels.num_classes());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        auto src = inv.apply({x - center[0], y - center[1], z - center[2]});
        const int xi = int(std::lround(src[0] + center[0]));
        const int yi = int(std::lround(src[1] + center[1]));
        const int zi = int(std::lround(src[2] + center[2]));
        std::uint8_t label = 0;  // background outside the field of view
        if (xi >= 0 && xi < d.nx && yi >= 0 && yi < d.ny && zi >= 0 && zi < d.nz)
          label = labels.at(xi, yi, zi);
        out_lab.at(x, y, z) = label;
      }
  return {std::move(out_img), std::move(out_lab)};
}

// --- pipeline ------------------------------------------------------------

namespace {

AugmentationParams sample_params(AugmentationKind kind, const Dims& dims, Rng& rng) {
  switch (kind) {
    case AugmentationKind::RfSpike: {
      RfSpikeParams p;
      // sample uniformly in centered coordinates, excluding a small ball
      // around DC where a spike only shifts global brightness (unless the
      // volume is so small the ball covers everything)
      const std::int64_t r2_limit = kSpikeDcExclusionRadius * kSpikeDcExclusionRadius;
      const std::int64_t max_r2 = std::int64_t(dims.nx / 2) * (dims.nx / 2) +
                                  std::int64_t(dims.ny / 2) * (dims.ny / 2) +
                                  std::int64_t(dims.nz / 2) * (dims.nz / 2);
      for (;;) {
        p.kx = int(rng.uniform_int(dims.nx)) - dims.nx / 2;
        p.ky = int(rng.uniform_int(dims.ny)) - dims.ny / 2;
        p.kz = int(rng.uniform_int(dims.nz)) - dims.nz / 2;
        const std::int64_t r2 = std::int64_t(p.kx) * p.kx + std::int64_t(p.ky) * p.ky +
                                std::int64_t(p.kz) * p.kz;
        if (r2 > r2_limit || max_r2 <= r2_limit) break;
      }
      p.magnitude = rng.uniform(kSpikeMagnitudeLo, kSpikeMagnitudeHi);
      return p;
    }
    case AugmentationKind::KNoise:
      return KNoiseParams{rng.uniform(kSnrDbLo, kSnrDbHi)};
    case AugmentationKind::LowPass:
      return LowPassParams{int(rng.uniform_int(3)),
                           rng.uniform(kLowPassRatioLo, kLowPassRatioHi)};
    case AugmentationKind::Wrap: {
      WrapParams p;
      p.axis = int(rng.uniform_int(3));
      p.proportion = rng.uniform(kWrapProportionLo, kWrapProportionHi);
      p.mode = rng.uniform01() < 0.5 ? WrapMode::UniformRandom
                                     : WrapMode::RegularInterval;
      p.planes = sample_wrap_planes(axis_len(dims, p.axis), p.proportion, p.mode, rng);
      return p;
    }
    case AugmentationKind::BiasField: {
      BiasFieldParams p;
      p.coeffs.resize(bias_monomials().size());
      for (auto& c : p.coeffs) c = rng.uniform(-kBiasCoeffRange, kBiasCoeffRange);
      return p;
    }
    case AugmentationKind::Spatial: {
      SpatialParams p;
      for (auto& f : p.flip) f = rng.uniform01() < 0.5;
      for (auto& r : p.rotation_deg) r = rng.uniform(-kRotationRangeDeg, kRotationRangeDeg);
      p.scale = rng.uniform(kScaleLo, kScaleHi);
      return p;
    }
  }
  fail("invalid augmentation kind");
}

bool is_kspace_kind(AugmentationKind k) {
  return k == AugmentationKind::RfSpike || k == AugmentationKind::KNoise ||
         k == AugmentationKind::LowPass || k == AugmentationKind::Wrap;
}

// Pipeline position; doubles as the fixed application order.
int order_rank(AugmentationKind k) {
  switch (k) {
    case AugmentationKind::RfSpike: return 0;
    case AugmentationKind::KNoise: return 1;
    case AugmentationKind::LowPass: return 2;
    case AugmentationKind::Wrap: return 2;  // mutually exclusive with LowPass
    case AugmentationKind::BiasField: return 3;
    case AugmentationKind::Spatial: return 4;
  }
  fail("invalid augmentation kind");
}

std::vector<AugmentationKind> choose_kinds(const PipelineConfig& cfg, Rng& rng) {
  std::vector<AugmentationKind> chosen;
  if (cfg.allow_multiple) {
    bool want_lowpass = false, want_wrap = false;
    for (auto kind : cfg.enabled) {
      if (cfg.weight(kind) <= 0.0) continue;
      if (kind == AugmentationKind::LowPass) want_lowpass = true;
      else if (kind == AugmentationKind::Wrap) want_wrap = true;
      else chosen.push_back(kind);
    }
    if (want_lowpass && want_wrap) {
      const double wl = cfg.weight(AugmentationKind::LowPass);
      const double ww = cfg.weight(AugmentationKind::Wrap);
      chosen.push_back(rng.uniform01() * (wl + ww) < wl ? AugmentationKind::LowPass
                                                        : AugmentationKind::Wrap);
    } else if (want_lowpass) {
      chosen.push_back(AugmentationKind::LowPass);
    } else if (want_wrap) {
      chosen.push_back(AugmentationKind::Wrap);
    }
  } else {
    double total = 0.0;
    for (auto kind : cfg.enabled) total += cfg.weight(kind);
    double pick = rng.uniform01() * total;
    for (auto kind : cfg.enabled) {
      pick -= cfg.weight(kind);
      if (pick < 0.0 || kind == cfg.enabled.back()) {
        chosen.push_back(kind);
        break;
      }
    }
  }
  std::stable_sort(chosen.begin(), chosen.end(),
                   [](auto a, auto b) { return order_rank(a) < order_rank(b); });
  return chosen;
}

}  // namespace

std::pair<Volume, AugmentationRecord> corrupt(const Volume& v, const PipelineConfig& cfg,
                                              Rng& rng) {
  cfg.validate();
  require(v.all_finite(), "corrupt: input volume has non-finite values");
  require(v.min_value() >= 0.0 && v.max_value() <= 1.0 + 1e-12,
          "corrupt: input volume must be normalized to [0,1]");

  if (rng.uniform01() >= cfg.rate) return {v, AugmentationRecord{}};

  AugmentationRecord record;
  for (auto kind : choose_kinds(cfg, rng)) {
    AppliedAugmentation entry;
    entry.kind = kind;
    entry.seed = rng.next_u64();
    Rng sub(entry.seed);
    entry.params = sample_params(kind, v.dims(), sub);
    record.applied.push_back(std::move(entry));
  }
  return {apply_record(v, record), std::move(record)};
}

Volume apply_record(const Volume& v, const AugmentationRecord& record) {
  if (record.applied.empty()) return v;
  Volume img = v;
  const bool any_kspace =
      std::any_of(record.applied.begin(), record.applied.end(),
                  [](const auto& a) { return is_kspace_kind(a.kind); });
  if (any_kspace) {
    ComplexVolume k = fft3(img);
    for (const auto& entry : record.applied) {
      if (!is_kspace_kind(entry.kind)) continue;
      // Reposition the per-entry rng exactly where corrupt() left it
      // after parameter sampling, so KNoise regenerates the same noise.
      Rng sub(entry.seed);
      (void)sample_params(entry.kind, v.dims(), sub);
      switch (entry.kind) {
        case AugmentationKind::RfSpike:
          k = apply_rf_spike(k, std::get<RfSpikeParams>(entry.params));
          break;
        case AugmentationKind::KNoise:
          k = apply_k_noise(k, std::get<KNoiseParams>(entry.params).target_snr_db, sub);
          break;
        case AugmentationKind::LowPass: {
          const auto& p = std::get<LowPassParams>(entry.params);
          k = apply_lowpass(k, p.axis, p.ratio);
          break;
        }
        case AugmentationKind::Wrap:
          k = apply_wrap(k, std::get<WrapParams>(entry.params));
          break;
        default: break;
      }
    }
    img = magnitude(ifft3(k));
  }
  for (const auto& entry : record.applied) {
    if (is_kspace_kind(entry.kind)) continue;
    if (entry.kind == AugmentationKind::BiasField)
      img = apply_bias_field(img, std::get<BiasFieldParams>(entry.params));
    else
      img = apply_spatial_image(img, std::get<SpatialParams>(entry.params));
  }
  return normalize_unit(img);
}

// --- record serialization --------------------------------------------------

namespace {

json params_to_json(const AppliedAugmentation& a) {
  json j;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, RfSpikeParams>) {
          j = {{"kx", p.kx}, {"ky", p.ky}, {"kz", p.kz}, {"magnitude", p.magnitude}};
        } else if constexpr (std::is_same_v<T, KNoiseParams>) {
          j = {{"target_snr_db", p.target_snr_db}};
        } else if constexpr (std::is_same_v<T, LowPassParams>) {
          j = {{"axis", p.axis}, {"ratio", p.ratio}};
        } else if constexpr (std::is_same_v<T, WrapParams>) {
          j = {{"axis", p.axis},
               {"proportion", p.proportion},
               {"mode", p.mode == WrapMode::UniformRandom ? "uniform" : "regular"},
               {"planes", p.planes}};
        } else if constexpr (std::is_same_v<T, BiasFieldParams>) {
          j = {{"coeffs", p.coeffs}};
        } else {
          j = {{"flip", p.flip},
               {"rotation_deg", p.rotation_deg},
               {"scale", p.scale}};
        }
      },
      a.params);
  return j;
}

AugmentationParams params_from_json(AugmentationKind kind, const json& j) {
  switch (kind) {
    case AugmentationKind::RfSpike:
      return RfSpikeParams{j.at("kx"), j.at("ky"), j.at("kz"), j.at("magnitude")};
    case AugmentationKind::KNoise: return KNoiseParams{j.at("target_snr_db")};
    case AugmentationKind::LowPass: return LowPassParams{j.at("axis"), j.at("ratio")};
    case AugmentationKind::Wrap: {
      WrapParams p;
      p.axis = j.at("axis");
      p.proportion = j.at("proportion");
      p.mode = j.at("mode") == "uniform" ? WrapMode::UniformRandom
                                         : WrapMode::RegularInterval;
      p.planes = j.at("planes").get<std::vector<int>>();
      return p;
    }
    case AugmentationKind::BiasField:
      return BiasFieldParams{j.at("coeffs").get<std::vector<double>>()};
    case AugmentationKind::Spatial: {
      SpatialParams p;
      auto flips = j.at("flip").get<std::vector<bool>>();
      auto rots = j.at("rotation_deg").get<std::vector<double>>();
      for (int a = 0; a < 3; ++a) {
        p.flip[a] = flips.at(a);
        p.rotation_deg[a] = rots.at(a);
      }
      p.scale = j.at("scale");
      return p;
    }
  }
  fail("invalid augmentation kind in record");
}

}  // namespace

std::string AugmentationRecord::to_json() const {
  json j = json::array();
  for (const auto& a : applied) {
    j.push_back({{"kind", to_string(a.kind)},
                 {"seed", a.seed},
                 {"params", params_to_json(a)}});
  }
  return j.dump();
}

AugmentationRecord AugmentationRecord::from_json(const std::string& text) {
  AugmentationRecord record;
  json j = json::parse(text);
  for (const auto& item : j) {
    AppliedAugmentation a;
    a.kind = augmentation_kind_from_string(item.at("kind"));
    a.seed = item.at("seed");
    a.params = params_from_json(a.kind, item.at("params"));
    record.applied.push_back(std::move(a));
  }
  return record;
}

}  // namespace mriqc
