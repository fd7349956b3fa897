#include "mriqc/volume.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mriqc {

namespace {
void check_dims(const Dims& d) {
  require(d.nx > 0 && d.ny > 0 && d.nz > 0, "dims must be positive, got ", d.str());
}
void check_spacing(const Spacing& s) {
  require(s.sx > 0 && s.sy > 0 && s.sz > 0, "voxel spacing must be strictly positive");
}
}  // namespace

Volume::Volume(Dims dims, Spacing spacing) : dims_(dims), spacing_(spacing) {
  check_dims(dims);
  check_spacing(spacing);
  data_.assign(dims.count(), 0.0);
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<double> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_dims(dims);
  check_spacing(spacing);
  require(std::int64_t(data_.size()) == dims.count(), "volume data length ",
          data_.size(), " does not match dims ", dims.str());
}

double Volume::min_value() const { return *std::min_element(data_.begin(), data_.end()); }
double Volume::max_value() const { return *std::max_element(data_.begin(), data_.end()); }

std::int64_t Volume::argmin() const {
  return std::min_element(data_.begin(), data_.end()) - data_.begin();
}
std::int64_t Volume::argmax() const {
  return std::max_element(data_.begin(), data_.end()) - data_.begin();
}

bool Volume::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

ComplexVolume::ComplexVolume(Dims dims) : dims_(dims) {
  check_dims(dims);
  data_.assign(dims.count(), {0.0, 0.0});
}

ComplexVolume::ComplexVolume(Dims dims, std::vector<std::complex<double>> data)
    : dims_(dims), data_(std::move(data)) {
  check_dims(dims);
  require(std::int64_t(data_.size()) == dims.count(), "complex volume data length ",
          data_.size(), " does not match dims ", dims.str());
}

LabelVolume::LabelVolume(Dims dims, int num_classes)
    : dims_(dims), num_classes_(num_classes) {
  check_dims(dims);
  require(num_classes >= 2, "num_classes must be >= 2, got ", num_classes);
  data_.assign(dims.count(), 0);
}

LabelVolume::LabelVolume(Dims dims, int num_classes, std::vector<std::uint8_t> data)
    : dims_(dims), num_classes_(num_classes), data_(std::move(data)) {
  check_dims(dims);
  require(num_classes >= 2, "num_classes must be >= 2, got ", num_classes);
  require(std::int64_t(data_.size()) == dims.count(), "label data length ",
          data_.size(), " does not match dims ", dims.str());
  validate();
}

void LabelVolume::validate() const {
  for (std::uint8_t v : data_)
    require(v < num_classes_, "label value ", int(v), " out of range for ",
            num_classes_, " classes");
}

UncertaintyMap::UncertaintyMap(Dims dims, std::vector<std::string> channel_names)
    : dims_(dims), names_(std::move(channel_names)) {
  check_dims(dims);
  require(!names_.empty(), "uncertainty map needs at least one channel");
  std::unordered_set<std::string> seen(names_.begin(), names_.end());
  require(seen.size() == names_.size(), "uncertainty channel names must be unique");
  data_.assign(std::int64_t(names_.size()) * dims.count(), 0.0);
}

int UncertaintyMap::channel_index(const std::string& name) const {
  for (int k = 0; k < channels(); ++k)
    if (names_[k] == name) return k;
  fail("no uncertainty channel named '", name, "'");
}

void UncertaintyMap::validate() const {
  for (double s : data_) {
    require(std::isfinite(s) && std::isfinite(std::exp(s)),
            "log-variance ", s, " does not map to a finite positive variance");
  }
}

Volume normalize_unit(const Volume& v) {
  for (std::int64_t i = 0; i < v.count(); ++i) {
    require(std::isfinite(v.data()[i]), "normalize_unit: non-finite value ",
            v.data()[i], " at linear index ", i);
  }
  const double lo = v.min_value();
  const double hi = v.max_value();
  Volume out(v.dims(), v.spacing());
  if (hi == lo) return out;  // degenerate range maps to all zeros
  const double scale = 1.0 / (hi - lo);
  for (std::int64_t i = 0; i < v.count(); ++i)
    out.data()[i] = (v.data()[i] - lo) * scale;
  return out;
}

Volume magnitude(const ComplexVolume& k) {
  Volume out(k.dims());
  for (std::int64_t i = 0; i < k.count(); ++i) out.data()[i] = std::abs(k.data()[i]);
  return out;
}

}  // namespace mriqc
