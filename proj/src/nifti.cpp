#include "mriqc/nifti.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace mriqc {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;

[[noreturn]] void io_fail(NiftiError code, const std::string& msg) {
  throw NiftiIoError(code, msg);
}

// little-endian primitive writers
void put_i32(std::vector<unsigned char>& b, std::size_t off, std::int32_t v) {
  for (int i = 0; i < 4; ++i) b[off + i] = (unsigned char)(std::uint32_t(v) >> (8 * i));
}
void put_i16(std::vector<unsigned char>& b, std::size_t off, std::int16_t v) {
  b[off] = (unsigned char)(std::uint16_t(v) & 0xff);
  b[off + 1] = (unsigned char)(std::uint16_t(v) >> 8);
}
void put_f32(std::vector<unsigned char>& b, std::size_t off, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  for (int i = 0; i < 4; ++i) b[off + i] = (unsigned char)(bits >> (8 * i));
}

// readers with optional byte swap
std::uint32_t get_u32(const unsigned char* p, bool swap) {
  std::uint32_t v = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                    std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
  if (swap) v = __builtin_bswap32(v);
  return v;
}
std::int32_t get_i32(const unsigned char* p, bool swap) {
  return std::int32_t(get_u32(p, swap));
}
std::int16_t get_i16(const unsigned char* p, bool swap) {
  std::uint16_t v = std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8;
  if (swap) v = std::uint16_t((v >> 8) | (v << 8));
  return std::int16_t(v);
}
float get_f32(const unsigned char* p, bool swap) {
  std::uint32_t bits = get_u32(p, swap);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}
double get_f64(const unsigned char* p, bool swap) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
  if (swap) bits = __builtin_bswap64(bits);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

std::pair<Volume, NiftiHeader> read_nifti_full(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) io_fail(NiftiError::Io, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderSize)
    io_fail(NiftiError::Truncated, path + ": file shorter than a NIfTI-1 header");

  // endianness detection via sizeof_hdr under both byte orders
  bool swap = false;
  if (get_i32(bytes.data(), false) == 348) {
    swap = false;
  } else if (get_i32(bytes.data(), true) == 348) {
    swap = true;
  } else {
    io_fail(NiftiError::BadHeader, path + ": sizeof_hdr is not 348 in either byte order");
  }

  // magic at offset 344
  const unsigned char* magic = bytes.data() + 344;
  if (std::memcmp(magic, "ni1\0", 4) == 0)
    io_fail(NiftiError::UnsupportedForm,
            path + ": two-file (hdr/img) NIfTI form is not supported");
  if (std::memcmp(magic, "n+1\0", 4) != 0)
    io_fail(NiftiError::BadMagic, path + ": missing n+1 magic");

  NiftiHeader hdr;
  hdr.byte_swapped = swap;
  const std::int16_t ndim = get_i16(bytes.data() + 40, swap);
  if (ndim != 3)
    io_fail(NiftiError::BadHeader,
            path + ": dim[0] = " + std::to_string(ndim) + ", only 3D volumes supported");
  for (int a = 0; a < 3; ++a) {
    hdr.dims[a] = get_i16(bytes.data() + 42 + 2 * a, swap);
    if (hdr.dims[a] <= 0)
      io_fail(NiftiError::BadHeader, path + ": non-positive dim");
    hdr.pixdim[a] = get_f32(bytes.data() + 80 + 4 * a, swap);
  }
  hdr.datatype = get_i16(bytes.data() + 70, swap);
  hdr.bitpix = get_i16(bytes.data() + 72, swap);
  if (hdr.datatype != 16 && hdr.datatype != 64)
    io_fail(NiftiError::UnsupportedDatatype,
            path + ": datatype " + std::to_string(hdr.datatype) +
                " unsupported (need 16=float32 or 64=float64)");
  const int expect_bits = hdr.datatype == 16 ? 32 : 64;
  if (hdr.bitpix != expect_bits)
    io_fail(NiftiError::BadHeader, path + ": bitpix does not match datatype");

  hdr.vox_offset = get_f32(bytes.data() + 108, swap);
  hdr.scl_slope = get_f32(bytes.data() + 112, swap);
  hdr.scl_inter = get_f32(bytes.data() + 116, swap);
  if (!(hdr.vox_offset >= 352.0))
    io_fail(NiftiError::BadHeader, path + ": vox_offset below 352");
  hdr.qform_code = get_i16(bytes.data() + 252, swap);
  hdr.sform_code = get_i16(bytes.data() + 254, swap);
  for (int i = 0; i < 6; ++i) hdr.quatern[i] = get_f32(bytes.data() + 256 + 4 * i, swap);
  for (int i = 0; i < 12; ++i) hdr.srow[i] = get_f32(bytes.data() + 280 + 4 * i, swap);

  const std::uint64_t offset = std::uint64_t(hdr.vox_offset);
  const std::int64_t count =
      std::int64_t(hdr.dims[0]) * hdr.dims[1] * hdr.dims[2];
  const std::size_t value_size = hdr.datatype == 16 ? 4 : 8;
  if (bytes.size() < offset + std::size_t(count) * value_size)
    io_fail(NiftiError::Truncated,
            path + ": file too short for the declared data extent");

  Spacing spacing{hdr.pixdim[0] > 0 ? hdr.pixdim[0] : 1.0,
                  hdr.pixdim[1] > 0 ? hdr.pixdim[1] : 1.0,
                  hdr.pixdim[2] > 0 ? hdr.pixdim[2] : 1.0};
  Volume v({hdr.dims[0], hdr.dims[1], hdr.dims[2]}, spacing);
  const bool apply_scale = hdr.scl_slope != 0.0;
  const unsigned char* data = bytes.data() + offset;
  for (std::int64_t i = 0; i < count; ++i) {
    double raw = hdr.datatype == 16 ? double(get_f32(data + 4 * i, swap))
                                    : get_f64(data + 8 * i, swap);
    v.data()[i] = apply_scale ? raw * hdr.scl_slope + hdr.scl_inter : raw;
  }
  return {std::move(v), hdr};
}

Volume read_nifti(const std::string& path) { return read_nifti_full(path).first; }

void write_nifti(const Volume& v, const std::string& path, NiftiDatatype datatype) {
  const Dims& d = v.dims();
  require(d.nx <= 0x7fff && d.ny <= 0x7fff && d.nz <= 0x7fff,
          "volume dims exceed the NIfTI-1 short range");
  const bool f32 = datatype == NiftiDatatype::Float32;
  const std::size_t value_size = f32 ? 4 : 8;

  std::vector<unsigned char> bytes(kVoxOffset + std::size_t(v.count()) * value_size, 0);
  put_i32(bytes, 0, 348);                          // sizeof_hdr
  put_i16(bytes, 40, 3);                           // dim[0]
  put_i16(bytes, 42, std::int16_t(d.nx));          // dim[1..3]
  put_i16(bytes, 44, std::int16_t(d.ny));
  put_i16(bytes, 46, std::int16_t(d.nz));
  for (int a = 4; a <= 7; ++a) put_i16(bytes, 40 + 2 * std::size_t(a), 1);
  put_i16(bytes, 70, f32 ? 16 : 64);               // datatype
  put_i16(bytes, 72, std::int16_t(8 * value_size));  // bitpix
  put_f32(bytes, 76, 1.0f);                        // pixdim[0] (qfac)
  put_f32(bytes, 80, float(v.spacing().sx));
  put_f32(bytes, 84, float(v.spacing().sy));
  put_f32(bytes, 88, float(v.spacing().sz));
  put_f32(bytes, 108, float(kVoxOffset));          // vox_offset
  put_f32(bytes, 112, 1.0f);                       // scl_slope
  put_f32(bytes, 116, 0.0f);                       // scl_inter
  std::memcpy(bytes.data() + 344, "n+1\0", 4);
  // bytes 348..351 stay zero: no header extensions

  for (std::int64_t i = 0; i < v.count(); ++i) {
    if (f32) {
      put_f32(bytes, kVoxOffset + 4 * std::size_t(i), float(v.data()[i]));
    } else {
      std::uint64_t bits;
      std::memcpy(&bits, &v.data()[i], 8);
      for (int b = 0; b < 8; ++b)
        bytes[kVoxOffset + 8 * std::size_t(i) + b] = (unsigned char)(bits >> (8 * b));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) io_fail(NiftiError::Io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out.good()) io_fail(NiftiError::Io, "short write to " + path);
}

}  // namespace mriqc
