#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mriqc/volume.hpp"

namespace mriqc {

// Dense 64-bit real tensor with up to 5 axes, row-major with the last axis
// fastest. Feature maps use the shape [channels, nz, ny, nx] so the x axis
// stays contiguous, matching Volume's layout.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape, double fill = 0.0);
  Tensor(std::vector<std::int64_t> shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  // [1, nz, ny, nx]
  static Tensor from_volume(const Volume& v);
  // [C, nz, ny, nx] one-hot encoding
  static Tensor one_hot(const LabelVolume& labels);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t count() const { return std::int64_t(v_.size()); }
  int rank() const { return int(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[i]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& operator[](std::int64_t i) { return v_[i]; }
  double operator[](std::int64_t i) const { return v_[i]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;
  bool all_finite() const;
  double item() const;  // value of a single-element tensor

  // Interprets the tensor as [1, nz, ny, nx] or [nz, ny, nx].
  Volume to_volume(Spacing spacing = {}) const;

  bool operator==(const Tensor&) const = default;

private:
  std::vector<std::int64_t> shape_;
  std::vector<double> v_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace mriqc
