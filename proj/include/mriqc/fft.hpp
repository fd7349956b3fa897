#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "mriqc/volume.hpp"

namespace mriqc {

enum class FftDirection { Forward, Inverse };

// 3D DFT plan, separable along the three axes. The forward transform is
// unnormalized with the DC term at index (0,0,0); the inverse carries the
// full 1/(nx*ny*nz) factor so ifft3(fft3(v)) == v. Plans are immutable and
// may be shared across threads; per-transform scratch is thread-local.
// Power-of-two axis lengths use an iterative radix-2 kernel, everything
// else goes through Bluestein's chirp-z algorithm.
class FftPlan {
public:
  FftPlan(Dims dims, FftDirection direction);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  const Dims& dims() const { return dims_; }
  FftDirection direction() const { return direction_; }

  ComplexVolume apply(const ComplexVolume& in) const;

private:
  struct AxisPlan;
  Dims dims_;
  FftDirection direction_;
  std::shared_ptr<AxisPlan> axis_[3];
};

ComplexVolume fft3(const ComplexVolume& v);
ComplexVolume fft3(const Volume& v);
ComplexVolume ifft3(const ComplexVolume& k);

// Direct triple-sum DFT used as an independent oracle in tests. Rejects
// volumes above 4096 voxels to keep the O(N^2) cost in check.
ComplexVolume dft3_naive(const ComplexVolume& v,
                         FftDirection direction = FftDirection::Forward);

}  // namespace mriqc
