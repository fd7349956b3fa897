#include "mriqc/tensor.hpp"

#include <cmath>

namespace mriqc {

namespace {
std::int64_t shape_count(const std::vector<std::int64_t>& shape) {
  require(!shape.empty() && shape.size() <= 5, "tensor rank must be 1..5, got ",
          shape.size());
  std::int64_t n = 1;
  for (auto d : shape) {
    require(d > 0, "tensor dims must be positive");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape, double fill) : shape_(std::move(shape)) {
  v_.assign(shape_count(shape_), fill);
}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), v_(std::move(values)) {
  require(shape_count(shape_) == std::int64_t(v_.size()), "tensor shape ", shape_str(),
          " does not match value count ", v_.size());
}

Tensor Tensor::from_volume(const Volume& v) {
  const Dims& d = v.dims();
  return Tensor({1, d.nz, d.ny, d.nx}, v.data());
}

Tensor Tensor::one_hot(const LabelVolume& labels) {
  const Dims& d = labels.dims();
  const int c = labels.num_classes();
  Tensor t({c, d.nz, d.ny, d.nx});
  const std::int64_t n = d.count();
  for (std::int64_t i = 0; i < n; ++i)
    t.data()[std::int64_t(labels.data()[i]) * n + i] = 1.0;
  return t;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

bool Tensor::all_finite() const {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

double Tensor::item() const {
  require(count() == 1, "item() needs a single-element tensor, shape is ", shape_str());
  return v_[0];
}

Volume Tensor::to_volume(Spacing spacing) const {
  require((rank() == 4 && shape_[0] == 1) || rank() == 3,
          "to_volume needs [1,nz,ny,nx] or [nz,ny,nx], shape is ", shape_str());
  const int off = rank() == 4 ? 1 : 0;
  Dims d{int(shape_[off + 2]), int(shape_[off + 1]), int(shape_[off + 0])};
  return Volume(d, spacing, v_);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), op, ": shape mismatch ", a.shape_str(), " vs ",
          b.shape_str());
}

}  // namespace mriqc
