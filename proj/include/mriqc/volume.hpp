#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "mriqc/common.hpp"

namespace mriqc {

struct Dims {
  int nx = 0, ny = 0, nz = 0;

  std::int64_t count() const { return std::int64_t(nx) * ny * nz; }
  bool operator==(const Dims&) const = default;
  std::string str() const { return strcat_all(nx, "x", ny, "x", nz); }
};

struct Spacing {
  double sx = 1.0, sy = 1.0, sz = 1.0;
  bool operator==(const Spacing&) const = default;
};

// Real scalar field over a 3D grid. Storage is x-fastest row-major:
// data[x + nx*(y + ny*z)].
class Volume {
public:
  Volume() = default;
  Volume(Dims dims, Spacing spacing = {});
  Volume(Dims dims, Spacing spacing, std::vector<double> data);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::int64_t count() const { return dims_.count(); }

  std::int64_t index(int x, int y, int z) const {
    return x + std::int64_t(dims_.nx) * (y + std::int64_t(dims_.ny) * z);
  }
  double& at(int x, int y, int z) { return data_[index(x, y, z)]; }
  double at(int x, int y, int z) const { return data_[index(x, y, z)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double min_value() const;
  double max_value() const;
  std::int64_t argmin() const;  // first occurrence
  std::int64_t argmax() const;
  bool all_finite() const;

  bool operator==(const Volume&) const = default;

private:
  Dims dims_;
  Spacing spacing_;
  std::vector<double> data_;
};

// Complex field with the same layout; the k-space side of a Volume.
class ComplexVolume {
public:
  ComplexVolume() = default;
  explicit ComplexVolume(Dims dims);
  ComplexVolume(Dims dims, std::vector<std::complex<double>> data);

  const Dims& dims() const { return dims_; }
  std::int64_t count() const { return dims_.count(); }

  std::int64_t index(int x, int y, int z) const {
    return x + std::int64_t(dims_.nx) * (y + std::int64_t(dims_.ny) * z);
  }
  std::complex<double>& at(int x, int y, int z) { return data_[index(x, y, z)]; }
  const std::complex<double>& at(int x, int y, int z) const {
    return data_[index(x, y, z)];
  }

  std::vector<std::complex<double>>& data() { return data_; }
  const std::vector<std::complex<double>>& data() const { return data_; }

  bool operator==(const ComplexVolume&) const = default;

private:
  Dims dims_;
  std::vector<std::complex<double>> data_;
};

// Per-voxel class indices in {0 .. num_classes-1}.
class LabelVolume {
public:
  LabelVolume() = default;
  LabelVolume(Dims dims, int num_classes);
  LabelVolume(Dims dims, int num_classes, std::vector<std::uint8_t> data);

  const Dims& dims() const { return dims_; }
  int num_classes() const { return num_classes_; }
  std::int64_t count() const { return dims_.count(); }

  std::int64_t index(int x, int y, int z) const {
    return x + std::int64_t(dims_.nx) * (y + std::int64_t(dims_.ny) * z);
  }
  std::uint8_t& at(int x, int y, int z) { return data_[index(x, y, z)]; }
  std::uint8_t at(int x, int y, int z) const { return data_[index(x, y, z)]; }

  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

  void validate() const;  // every value < num_classes

  bool operator==(const LabelVolume&) const = default;

private:
  Dims dims_;
  int num_classes_ = 0;
  std::vector<std::uint8_t> data_;
};

// Per-voxel log-variance s = log(sigma^2), one channel per named source.
// Channel-major storage: channel k occupies [k*count, (k+1)*count).
class UncertaintyMap {
public:
  UncertaintyMap() = default;
  UncertaintyMap(Dims dims, std::vector<std::string> channel_names);

  const Dims& dims() const { return dims_; }
  int channels() const { return int(names_.size()); }
  const std::vector<std::string>& channel_names() const { return names_; }
  int channel_index(const std::string& name) const;

  double* channel(int k) { return data_.data() + std::int64_t(k) * dims_.count(); }
  const double* channel(int k) const {
    return data_.data() + std::int64_t(k) * dims_.count();
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void validate() const;  // exp(s) finite and positive; names unique

private:
  Dims dims_;
  std::vector<std::string> names_;
  std::vector<double> data_;
};

// Class probabilities, channel-major like UncertaintyMap.
struct ClassProbabilities {
  Dims dims;
  int num_classes = 0;
  std::vector<double> data;

  double at(int c, std::int64_t voxel) const {
    return data[std::int64_t(c) * dims.count() + voxel];
  }
};

// Affine rescale to [0, 1]; a constant volume maps to all zeros.
Volume normalize_unit(const Volume& v);

// Per-voxel modulus.
Volume magnitude(const ComplexVolume& k);

}  // namespace mriqc
