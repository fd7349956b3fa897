#include "mriqc/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace mriqc {

using cd = std::complex<double>;

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_pow2(int n) {
  int m = 1;
  while (m < n) m <<= 1;
  return m;
}

// In-place radix-2 Cooley-Tukey. `tw` holds n/2 twiddles for the requested
// direction.
void fft_pow2(cd* a, int n, const std::vector<cd>& tw) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int step = n / len;
    const int half = len / 2;
    for (int i = 0; i < n; i += len) {
      for (int j = 0; j < half; ++j) {
        cd u = a[i + j];
        cd v = a[i + j + half] * tw[std::size_t(j) * step];
        a[i + j] = u + v;
        a[i + j + half] = u - v;
      }
    }
  }
}

}  // namespace

// One axis of the separable transform.
struct FftPlan::AxisPlan {
  int n = 1;
  double sign = -1.0;  // -1 forward, +1 inverse
  std::vector<cd> twiddle;  // radix-2 twiddles, size n/2 (pow2 only)

  // Bluestein state (non-pow2 sizes)
  int m = 0;                 // convolution FFT size, pow2 >= 2n-1
  std::vector<cd> chirp;     // exp(sign*pi*i*j^2/n), j in [0, n)
  std::vector<cd> kernel_f;  // FFT of wrapped conjugate chirp, length m
  std::vector<cd> tw_m;      // forward twiddles for size m
  std::vector<cd> tw_m_inv;  // inverse twiddles for size m

  AxisPlan(int n_, FftDirection dir)
      : n(n_), sign(dir == FftDirection::Forward ? -1.0 : 1.0) {
    require(n >= 1, "fft axis length must be >= 1");
    if (is_pow2(n)) {
      twiddle.resize(std::size_t(n) / 2);
      for (int j = 0; j < n / 2; ++j)
        twiddle[j] = std::polar(1.0, sign * 2.0 * M_PI * j / n);
      return;
    }
    m = next_pow2(2 * n - 1);
    chirp.resize(n);
    for (int j = 0; j < n; ++j) {
      // phase reduced mod 2n before multiplying by pi/n, keeping the
      // argument small for large j
      long long q = (1LL * j * j) % (2LL * n);
      chirp[j] = std::polar(1.0, sign * M_PI * double(q) / n);
    }
    tw_m.resize(std::size_t(m) / 2);
    tw_m_inv.resize(std::size_t(m) / 2);
    for (int j = 0; j < m / 2; ++j) {
      tw_m[j] = std::polar(1.0, -2.0 * M_PI * j / m);
      tw_m_inv[j] = std::polar(1.0, 2.0 * M_PI * j / m);
    }
    std::vector<cd> b(m, cd{0.0, 0.0});
    b[0] = std::conj(chirp[0]);
    for (int j = 1; j < n; ++j) {
      b[j] = std::conj(chirp[j]);
      b[m - j] = std::conj(chirp[j]);
    }
    fft_pow2(b.data(), m, tw_m);
    kernel_f = std::move(b);
  }

  void transform(cd* line) const {
    if (m == 0) {
      if (n > 1) fft_pow2(line, n, twiddle);
      return;
    }
    thread_local std::vector<cd> scratch;
    scratch.assign(m, cd{0.0, 0.0});
    for (int j = 0; j < n; ++j) scratch[j] = line[j] * chirp[j];
    fft_pow2(scratch.data(), m, tw_m);
    for (int j = 0; j < m; ++j) scratch[j] *= kernel_f[j];
    fft_pow2(scratch.data(), m, tw_m_inv);
    const double inv_m = 1.0 / m;
    for (int k = 0; k < n; ++k) line[k] = scratch[k] * inv_m * chirp[k];
  }
};

FftPlan::FftPlan(Dims dims, FftDirection direction)
    : dims_(dims), direction_(direction) {
  require(dims.nx >= 1 && dims.ny >= 1 && dims.nz >= 1,
          "fft dims must be >= 1, got ", dims.str());
  require(dims.count() <= (std::int64_t(1) << 42), "fft dims overflow: ", dims.str());
  const int n[3] = {dims.nx, dims.ny, dims.nz};
  for (int axis = 0; axis < 3; ++axis) {
    for (int prev = 0; prev < axis; ++prev) {
      if (n[prev] == n[axis]) {
        axis_[axis] = axis_[prev];
        break;
      }
    }
    if (!axis_[axis]) axis_[axis] = std::make_shared<AxisPlan>(n[axis], direction);
  }
}

FftPlan::~FftPlan() = default;

ComplexVolume FftPlan::apply(const ComplexVolume& in) const {
  require(in.dims() == dims_, "fft plan dims ", dims_.str(),
          " do not match volume dims ", in.dims().str());
  ComplexVolume out = in;
  cd* d = out.data().data();
  const int nx = dims_.nx, ny = dims_.ny, nz = dims_.nz;

  // x axis: contiguous lines
  for (std::int64_t line = 0; line < std::int64_t(ny) * nz; ++line)
    axis_[0]->transform(d + line * nx);

  // y and z axes: gather/scatter through a thread-local buffer
  thread_local std::vector<cd> buf;
  if (ny > 1) {
    buf.resize(ny);
    for (int z = 0; z < nz; ++z) {
      for (int x = 0; x < nx; ++x) {
        cd* base = d + x + std::int64_t(nx) * ny * z;
        for (int y = 0; y < ny; ++y) buf[y] = base[std::int64_t(y) * nx];
        axis_[1]->transform(buf.data());
        for (int y = 0; y < ny; ++y) base[std::int64_t(y) * nx] = buf[y];
      }
    }
  }
  if (nz > 1) {
    buf.resize(nz);
    const std::int64_t zstride = std::int64_t(nx) * ny;
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        cd* base = d + x + std::int64_t(nx) * y;
        for (int z = 0; z < nz; ++z) buf[z] = base[zstride * z];
        axis_[2]->transform(buf.data());
        for (int z = 0; z < nz; ++z) base[zstride * z] = buf[z];
      }
    }
  }

  if (direction_ == FftDirection::Inverse) {
    const double norm = 1.0 / double(dims_.count());
    for (auto& v : out.data()) v *= norm;
  }
  return out;
}

namespace {

// Small process-wide plan cache; plans are immutable so sharing is safe.
const FftPlan& cached_plan(Dims dims, FftDirection dir) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int, int>, std::unique_ptr<FftPlan>> cache;
  std::scoped_lock lk(mu);
  auto key = std::make_tuple(dims.nx, dims.ny, dims.nz, int(dir));
  auto& slot = cache[key];
  if (!slot) slot = std::make_unique<FftPlan>(dims, dir);
  return *slot;
}

}  // namespace

ComplexVolume fft3(const ComplexVolume& v) {
  return cached_plan(v.dims(), FftDirection::Forward).apply(v);
}

ComplexVolume fft3(const Volume& v) {
  ComplexVolume c(v.dims());
  for (std::int64_t i = 0; i < v.count(); ++i) c.data()[i] = cd{v.data()[i], 0.0};
  return fft3(c);
}

ComplexVolume ifft3(const ComplexVolume& k) {
  return cached_plan(k.dims(), FftDirection::Inverse).apply(k);
}

ComplexVolume dft3_naive(const ComplexVolume& v, FftDirection direction) {
  require(v.count() <= 4096, "dft3_naive limited to 4096 voxels, got ", v.count());
  const int nx = v.dims().nx, ny = v.dims().ny, nz = v.dims().nz;
  const double sign = direction == FftDirection::Forward ? -1.0 : 1.0;
  ComplexVolume out(v.dims());
  for (int kz = 0; kz < nz; ++kz)
    for (int ky = 0; ky < ny; ++ky)
      for (int kx = 0; kx < nx; ++kx) {
        cd acc{0.0, 0.0};
        for (int z = 0; z < nz; ++z)
          for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
              double phase = 2.0 * M_PI *
                             (double(kx) * x / nx + double(ky) * y / ny +
                              double(kz) * z / nz);
              acc += v.at(x, y, z) * std::polar(1.0, sign * phase);
            }
        if (direction == FftDirection::Inverse) acc /= double(v.count());
        out.at(kx, ky, kz) = acc;
      }
  return out;
}

}  // namespace mriqc
