#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mriqc/volume.hpp"

namespace mriqc {

enum class NiftiError {
  Io,
  BadHeader,
  BadMagic,
  UnsupportedForm,      // two-file "ni1" form
  UnsupportedDatatype,  // anything but float32/float64
  Truncated,
};

class NiftiIoError : public Error {
public:
  NiftiIoError(NiftiError code, const std::string& msg) : Error(msg), code_(code) {}
  NiftiError code() const { return code_; }

private:
  NiftiError code_;
};

// Parsed single-file NIfTI-1 header. Orientation (qform/sform) is read and
// stored but never applied; volumes are processed in voxel space.
struct NiftiHeader {
  int dims[3] = {0, 0, 0};
  double pixdim[3] = {1.0, 1.0, 1.0};
  short datatype = 16;  // 16 float32, 64 float64
  short bitpix = 32;
  double vox_offset = 352.0;
  double scl_slope = 1.0;
  double scl_inter = 0.0;
  short qform_code = 0;
  short sform_code = 0;
  std::array<double, 6> quatern = {};  // b, c, d, qoffset x/y/z
  std::array<double, 12> srow = {};
  bool byte_swapped = false;  // source file endianness differed from native
};

enum class NiftiDatatype { Float32 = 16, Float64 = 64 };

Volume read_nifti(const std::string& path);
std::pair<Volume, NiftiHeader> read_nifti_full(const std::string& path);

// Little-endian single-file NIfTI-1, vox_offset 352, slope 1 / inter 0.
// Output bytes are a pure function of the volume contents.
void write_nifti(const Volume& v, const std::string& path,
                 NiftiDatatype datatype = NiftiDatatype::Float32);

}  // namespace mriqc
