// Direct 3D convolution kernels. The stride-1 zero-padded forms needed by
// the toy network (kernel width 3 in x) get vectorized paths; everything
// else falls back to a scalar reference implementation. All variants keep
// a fixed accumulation order, so results are reproducible regardless of
// thread count.

#include <algorithm>
#include <cstring>
#include <vector>

#include "mriqc/tape.hpp"
#include "mriqc/threading.hpp"

#if defined(__AVX512F__)
#define MRIQC_HAVE_AVX512 1
#include <immintrin.h>
#elif defined(__AVX2__) && defined(__FMA__)
#define MRIQC_HAVE_AVX2 1
#include <immintrin.h>
#endif

namespace mriqc {

namespace {

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor* bias) {
  require(x.rank() == 4, "conv3d: input must be [C,Z,Y,X], shape is ", x.shape_str());
  require(w.rank() == 5, "conv3d: weights must be [OC,IC,KZ,KY,KX], shape is ",
          w.shape_str());
  require(w.dim(1) == x.dim(0), "conv3d: weight input channels ", w.dim(1),
          " do not match input channels ", x.dim(0));
  for (int i = 2; i < 5; ++i)
    require(w.dim(i) % 2 == 1, "conv3d: kernel dims must be odd, shape is ",
            w.shape_str());
  if (bias)
    require(bias->rank() == 1 && bias->dim(0) == w.dim(0),
            "conv3d: bias shape ", bias->shape_str(), " must be [", w.dim(0), "]");
}

struct ConvGeom {
  std::int64_t ic_n, zn, yn, xn, oc_n, kz_n, ky_n, kx_n, pz, py, px, plane;
};

ConvGeom geom_of(const Tensor& x, const Tensor& w) {
  ConvGeom g;
  g.ic_n = x.dim(0);
  g.zn = x.dim(1);
  g.yn = x.dim(2);
  g.xn = x.dim(3);
  g.oc_n = w.dim(0);
  g.kz_n = w.dim(2);
  g.ky_n = w.dim(3);
  g.kx_n = w.dim(4);
  g.pz = g.kz_n / 2;
  g.py = g.ky_n / 2;
  g.px = g.kx_n / 2;
  g.plane = g.zn * g.yn * g.xn;
  return g;
}

// ---- scalar row helpers -----------------------------------------------------

// out_row[x] += sum_kx w[kx] * in_row[x+kx-px]
void scalar_row_add(double* __restrict a, const double* __restrict row,
                    const double* wrow, std::int64_t xn, std::int64_t kx_n,
                    std::int64_t px) {
  for (std::int64_t kx = 0; kx < kx_n; ++kx) {
    const std::int64_t dx = kx - px;
    const double wv = wrow[kx];
    const std::int64_t lo = std::max<std::int64_t>(0, -dx);
    const std::int64_t hi = std::min(xn, xn - dx);
    for (std::int64_t xx = lo; xx < hi; ++xx) a[xx] += wv * row[xx + dx];
  }
}

// out_row[x] += sum_kx w[kx] * in_row[x-kx+px]
void scalar_row_corr(double* __restrict a, const double* __restrict row,
                     const double* wrow, std::int64_t xn, std::int64_t kx_n,
                     std::int64_t px) {
  for (std::int64_t kx = 0; kx < kx_n; ++kx) {
    const std::int64_t dx = kx - px;
    const double wv = wrow[kx];
    const std::int64_t lo = std::max<std::int64_t>(0, dx);
    const std::int64_t hi = std::min(xn, xn + dx);
    for (std::int64_t xx = lo; xx < hi; ++xx) a[xx] += wv * row[xx - dx];
  }
}

// wg[kx] += sum_x g[x] * in_row[x+kx-px]
void scalar_row_dots(const double* __restrict g, const double* __restrict row,
                     double* wg, std::int64_t xn, std::int64_t kx_n, std::int64_t px) {
  for (std::int64_t kx = 0; kx < kx_n; ++kx) {
    const std::int64_t dx = kx - px;
    const std::int64_t lo = std::max<std::int64_t>(0, -dx);
    const std::int64_t hi = std::min(xn, xn - dx);
    double dot = 0.0;
    for (std::int64_t xx = lo; xx < hi; ++xx) dot += g[xx] * row[xx + dx];
    wg[kx] += dot;
  }
}

// ---- SIMD abstraction --------------------------------------------------------

#if MRIQC_HAVE_AVX512

struct VecD {
  static constexpr std::int64_t width = 8;
  using reg = __m512d;
  using mask = __mmask8;
  static mask make_mask(std::int64_t valid) { return mask((1u << valid) - 1u); }
  static mask mask_clear_lane(mask m, int lane) { return mask(m & ~(1u << lane)); }
  static reg zero() { return _mm512_setzero_pd(); }
  static reg set1(double v) { return _mm512_set1_pd(v); }
  static reg load(mask m, const double* p) { return _mm512_maskz_loadu_pd(m, p); }
  static void store(mask m, double* p, reg v) { _mm512_mask_storeu_pd(p, m, v); }
  static reg fmadd(reg a, reg b, reg c) { return _mm512_fmadd_pd(a, b, c); }
  static double reduce(reg v) { return _mm512_reduce_add_pd(v); }
};
#define MRIQC_SIMD_CONV 1

#elif MRIQC_HAVE_AVX2

struct VecD {
  static constexpr std::int64_t width = 4;
  using reg = __m256d;
  using mask = __m256i;
  static mask make_mask(std::int64_t valid) {
    alignas(32) std::int64_t lanes[4];
    for (int i = 0; i < 4; ++i) lanes[i] = i < valid ? -1 : 0;
    return _mm256_load_si256(reinterpret_cast<const __m256i*>(lanes));
  }
  static mask mask_clear_lane(mask m, int lane) {
    alignas(32) std::int64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), m);
    lanes[lane] = 0;
    return _mm256_load_si256(reinterpret_cast<const __m256i*>(lanes));
  }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg load(mask m, const double* p) { return _mm256_maskload_pd(p, m); }
  static void store(mask m, double* p, reg v) { _mm256_maskstore_pd(p, m, v); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static double reduce(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
  }
};
#define MRIQC_SIMD_CONV 1

#else
#define MRIQC_SIMD_CONV 0
#endif

#if MRIQC_SIMD_CONV

// Full rows are processed in windows of up to 4 vector chunks. Zero padding
// at the row ends is expressed through the shifted-load masks, so there is
// no scalar boundary pass.
constexpr std::int64_t kWindowChunks = 4;

struct ChunkMasks {
  VecD::mask center, left, right;
};

struct RowPlan {
  std::vector<ChunkMasks> chunks;  // covers the whole row [0, xn)
};

RowPlan plan_row(std::int64_t xn) {
  RowPlan plan;
  const std::int64_t n_chunks = (xn + VecD::width - 1) / VecD::width;
  plan.chunks.resize(std::size_t(n_chunks));
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    const std::int64_t base = c * VecD::width;
    const std::int64_t valid = std::min<std::int64_t>(VecD::width, xn - base);
    ChunkMasks& m = plan.chunks[std::size_t(c)];
    m.center = VecD::make_mask(valid);
    m.left = m.center;
    m.right = m.center;
    if (c == 0) m.left = VecD::mask_clear_lane(m.left, 0);  // row[-1] is padding
    if (base + valid == xn)
      m.right = VecD::mask_clear_lane(m.right, int(valid - 1));  // row[xn]
  }
  return plan;
}

// A tap is a constant row offset from the current (z,y) anchor plus the
// three x weights in application order. For interior rows the same tap list
// applies verbatim, so it is built once per output channel.
struct TapOff {
  std::int64_t offset;
  double w0, w1, w2;
};

// One window of up to kWindowChunks chunks, accumulators pinned in named
// registers across the whole tap loop.
template <int NCH>
void row_window(double* out_row, const double* anchor, double init, const TapOff* taps,
                int n_taps, const ChunkMasks* cm) {
  constexpr std::int64_t W = VecD::width;
  VecD::reg a0 = VecD::set1(init), a1 = a0, a2 = a0, a3 = a0;
  for (int t = 0; t < n_taps; ++t) {
    const double* row = anchor + taps[t].offset;
    const VecD::reg w0 = VecD::set1(taps[t].w0);
    const VecD::reg w1 = VecD::set1(taps[t].w1);
    const VecD::reg w2 = VecD::set1(taps[t].w2);
    a0 = VecD::fmadd(w0, VecD::load(cm[0].left, row - 1), a0);
    a0 = VecD::fmadd(w1, VecD::load(cm[0].center, row), a0);
    a0 = VecD::fmadd(w2, VecD::load(cm[0].right, row + 1), a0);
    if constexpr (NCH >= 2) {
      a1 = VecD::fmadd(w0, VecD::load(cm[1].left, row + W - 1), a1);
      a1 = VecD::fmadd(w1, VecD::load(cm[1].center, row + W), a1);
      a1 = VecD::fmadd(w2, VecD::load(cm[1].right, row + W + 1), a1);
    }
    if constexpr (NCH >= 3) {
      a2 = VecD::fmadd(w0, VecD::load(cm[2].left, row + 2 * W - 1), a2);
      a2 = VecD::fmadd(w1, VecD::load(cm[2].center, row + 2 * W), a2);
      a2 = VecD::fmadd(w2, VecD::load(cm[2].right, row + 2 * W + 1), a2);
    }
    if constexpr (NCH >= 4) {
      a3 = VecD::fmadd(w0, VecD::load(cm[3].left, row + 3 * W - 1), a3);
      a3 = VecD::fmadd(w1, VecD::load(cm[3].center, row + 3 * W), a3);
      a3 = VecD::fmadd(w2, VecD::load(cm[3].right, row + 3 * W + 1), a3);
    }
  }
  VecD::store(cm[0].center, out_row, a0);
  if constexpr (NCH >= 2) VecD::store(cm[1].center, out_row + W, a1);
  if constexpr (NCH >= 3) VecD::store(cm[2].center, out_row + 2 * W, a2);
  if constexpr (NCH >= 4) VecD::store(cm[3].center, out_row + 3 * W, a3);
}

// Whole-row update: out_row[x] = init + sum_taps sum_kx w * in[x+kx-1].
void simd_row_taps(double* out_row, const double* anchor, double init,
                   const TapOff* taps, int n_taps, const RowPlan& plan) {
  const std::int64_t n_chunks = std::int64_t(plan.chunks.size());
  for (std::int64_t w = 0; w < n_chunks; w += kWindowChunks) {
    const std::int64_t nch = std::min(kWindowChunks, n_chunks - w);
    double* out = out_row + w * VecD::width;
    const double* anc = anchor + w * VecD::width;
    const ChunkMasks* cm = plan.chunks.data() + w;
    switch (nch) {
      case 1: row_window<1>(out, anc, init, taps, n_taps, cm); break;
      case 2: row_window<2>(out, anc, init, taps, n_taps, cm); break;
      case 3: row_window<3>(out, anc, init, taps, n_taps, cm); break;
      default: row_window<4>(out, anc, init, taps, n_taps, cm); break;
    }
  }
}

#endif  // MRIQC_SIMD_CONV

}  // namespace

// ---- forward -----------------------------------------------------------------

void conv3d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, Tensor& out) {
  check_conv_shapes(x, w, bias);
  const ConvGeom g = geom_of(x, w);
  out = Tensor({g.oc_n, g.zn, g.yn, g.xn});
  const double* xd = x.data();
  const double* wd = w.data();
  double* od = out.data();

#if MRIQC_SIMD_CONV
  if (g.kx_n == 3 && g.xn >= 2) {
    const RowPlan rm = plan_row(g.xn);
    parallel_for(g.oc_n, [&](std::int64_t oc) {
      const double bias_v = bias ? bias->data()[oc] : 0.0;
      // tap lists relative to the (z,y) anchor; the full list serves every
      // interior row, edge rows get a filtered copy
      std::vector<TapOff> full_taps, edge_taps;
      for (std::int64_t ic = 0; ic < g.ic_n; ++ic) {
        const double* wbase = wd + ((oc * g.ic_n + ic) * g.kz_n) * g.ky_n * 3;
        for (std::int64_t kz = 0; kz < g.kz_n; ++kz)
          for (std::int64_t ky = 0; ky < g.ky_n; ++ky) {
            const double* wrow = wbase + (kz * g.ky_n + ky) * 3;
            full_taps.push_back({ic * g.plane +
                                     ((kz - g.pz) * g.yn + (ky - g.py)) * g.xn,
                                 wrow[0], wrow[1], wrow[2]});
          }
      }
      edge_taps.reserve(full_taps.size());
      for (std::int64_t z = 0; z < g.zn; ++z) {
        const bool z_interior = z >= g.pz && z < g.zn - g.pz;
        for (std::int64_t y = 0; y < g.yn; ++y) {
          const bool interior = z_interior && y >= g.py && y < g.yn - g.py;
          const double* anchor = xd + (z * g.yn + y) * g.xn;
          const TapOff* taps = full_taps.data();
          int n_taps = int(full_taps.size());
          if (!interior) {
            edge_taps.clear();
            std::size_t t = 0;
            for (std::int64_t ic = 0; ic < g.ic_n; ++ic)
              for (std::int64_t kz = 0; kz < g.kz_n; ++kz)
                for (std::int64_t ky = 0; ky < g.ky_n; ++ky, ++t) {
                  const std::int64_t zi = z + kz - g.pz;
                  const std::int64_t yi = y + ky - g.py;
                  if (zi < 0 || zi >= g.zn || yi < 0 || yi >= g.yn) continue;
                  edge_taps.push_back(full_taps[t]);
                }
            taps = edge_taps.data();
            n_taps = int(edge_taps.size());
          }
          double* out_row = od + (oc * g.zn + z) * g.yn * g.xn + y * g.xn;
          simd_row_taps(out_row, anchor, bias_v, taps, n_taps, rm);
        }
      }
    });
    return;
  }
#endif

  parallel_for(g.oc_n, [&](std::int64_t oc) {
    const double bias_v = bias ? bias->data()[oc] : 0.0;
    std::vector<double> acc(static_cast<std::size_t>(g.xn));
    for (std::int64_t z = 0; z < g.zn; ++z) {
      for (std::int64_t y = 0; y < g.yn; ++y) {
        std::fill(acc.begin(), acc.end(), bias_v);
        for (std::int64_t ic = 0; ic < g.ic_n; ++ic) {
          const double* xc = xd + ic * g.plane;
          const double* wbase = wd + ((oc * g.ic_n + ic) * g.kz_n) * g.ky_n * g.kx_n;
          for (std::int64_t kz = 0; kz < g.kz_n; ++kz) {
            const std::int64_t zi = z + kz - g.pz;
            if (zi < 0 || zi >= g.zn) continue;
            for (std::int64_t ky = 0; ky < g.ky_n; ++ky) {
              const std::int64_t yi = y + ky - g.py;
              if (yi < 0 || yi >= g.yn) continue;
              scalar_row_add(acc.data(), xc + (zi * g.yn + yi) * g.xn,
                             wbase + (kz * g.ky_n + ky) * g.kx_n, g.xn, g.kx_n, g.px);
            }
          }
        }
        std::memcpy(od + (oc * g.zn + z) * g.yn * g.xn + y * g.xn, acc.data(),
                    std::size_t(g.xn) * sizeof(double));
      }
    }
  });
}

// ---- backward: input ------------------------------------------------------------

void conv3d_backward_input(const Tensor& g_out, const Tensor& w, Tensor& g_x) {
  const std::int64_t oc_n = w.dim(0), ic_n = w.dim(1);
  const std::int64_t kz_n = w.dim(2), ky_n = w.dim(3), kx_n = w.dim(4);
  const std::int64_t zn = g_out.dim(1), yn = g_out.dim(2), xn = g_out.dim(3);
  const std::int64_t pz = kz_n / 2, py = ky_n / 2, px = kx_n / 2;
  const std::int64_t plane = zn * yn * xn;
  const double* gd = g_out.data();
  const double* wd = w.data();
  double* xd = g_x.data();

#if MRIQC_SIMD_CONV
  if (kx_n == 3 && xn >= 2) {
    const RowPlan rm = plan_row(xn);
    parallel_for(ic_n, [&](std::int64_t ic) {
      // correlation taps relative to the (zi,yi) anchor, x weights swapped
      std::vector<TapOff> full_taps, edge_taps;
      for (std::int64_t oc = 0; oc < oc_n; ++oc) {
        const double* wbase = wd + ((oc * ic_n + ic) * kz_n) * ky_n * 3;
        for (std::int64_t kz = 0; kz < kz_n; ++kz)
          for (std::int64_t ky = 0; ky < ky_n; ++ky) {
            const double* wrow = wbase + (kz * ky_n + ky) * 3;
            full_taps.push_back({oc * plane - ((kz - pz) * yn + (ky - py)) * xn,
                                 wrow[2], wrow[1], wrow[0]});
          }
      }
      edge_taps.reserve(full_taps.size());
      std::vector<double> acc(static_cast<std::size_t>(xn));
      for (std::int64_t zi = 0; zi < zn; ++zi) {
        const bool z_interior = zi >= pz && zi < zn - pz;
        for (std::int64_t yi = 0; yi < yn; ++yi) {
          const bool interior = z_interior && yi >= py && yi < yn - py;
          const double* anchor = gd + (zi * yn + yi) * xn;
          const TapOff* taps = full_taps.data();
          int n_taps = int(full_taps.size());
          if (!interior) {
            edge_taps.clear();
            std::size_t t = 0;
            for (std::int64_t oc = 0; oc < oc_n; ++oc)
              for (std::int64_t kz = 0; kz < kz_n; ++kz)
                for (std::int64_t ky = 0; ky < ky_n; ++ky, ++t) {
                  const std::int64_t zo = zi - (kz - pz);
                  const std::int64_t yo = yi - (ky - py);
                  if (zo < 0 || zo >= zn || yo < 0 || yo >= yn) continue;
                  edge_taps.push_back(full_taps[t]);
                }
            taps = edge_taps.data();
            n_taps = int(edge_taps.size());
          }
          simd_row_taps(acc.data(), anchor, 0.0, taps, n_taps, rm);
          double* dst = xd + (ic * zn + zi) * yn * xn + yi * xn;
          for (std::int64_t xx = 0; xx < xn; ++xx) dst[xx] += acc[xx];
        }
      }
    });
    return;
  }
#endif

  parallel_for(ic_n, [&](std::int64_t ic) {
    std::vector<double> acc(static_cast<std::size_t>(xn));
    for (std::int64_t zi = 0; zi < zn; ++zi) {
      for (std::int64_t yi = 0; yi < yn; ++yi) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::int64_t oc = 0; oc < oc_n; ++oc) {
          const double* gc = gd + oc * plane;
          const double* wbase = wd + ((oc * ic_n + ic) * kz_n) * ky_n * kx_n;
          for (std::int64_t kz = 0; kz < kz_n; ++kz) {
            const std::int64_t zo = zi - (kz - pz);
            if (zo < 0 || zo >= zn) continue;
            for (std::int64_t ky = 0; ky < ky_n; ++ky) {
              const std::int64_t yo = yi - (ky - py);
              if (yo < 0 || yo >= yn) continue;
              scalar_row_corr(acc.data(), gc + (zo * yn + yo) * xn,
                              wbase + (kz * ky_n + ky) * kx_n, xn, kx_n, px);
            }
          }
        }
        double* dst = xd + (ic * zn + zi) * yn * xn + yi * xn;
        for (std::int64_t xx = 0; xx < xn; ++xx) dst[xx] += acc[xx];
      }
    }
  });
}

// ---- backward: weights and bias -----------------------------------------------------

void conv3d_backward_params(const Tensor& g_out, const Tensor& x, Tensor& g_w,
                            Tensor* g_b) {
  const std::int64_t oc_n = g_w.dim(0), ic_n = g_w.dim(1);
  const std::int64_t kz_n = g_w.dim(2), ky_n = g_w.dim(3), kx_n = g_w.dim(4);
  const std::int64_t zn = x.dim(1), yn = x.dim(2), xn = x.dim(3);
  const std::int64_t pz = kz_n / 2, py = ky_n / 2, px = kx_n / 2;
  const std::int64_t plane = zn * yn * xn;
  const double* gd = g_out.data();
  const double* xd = x.data();

#if MRIQC_SIMD_CONV
  if (kx_n == 3 && ky_n == 3 && xn >= 2) {
    const RowPlan rm = plan_row(xn);
    const std::int64_t n_chunks = std::int64_t(rm.chunks.size());
    parallel_for(oc_n, [&](std::int64_t oc) {
      const double* gc = gd + oc * plane;
      if (g_b) {
        double bias_acc = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) bias_acc += gc[i];
        g_b->data()[oc] += bias_acc;
      }
      // out-of-range ky rows read zeros so the chunk loop stays branch-free
      std::vector<double> zeros(std::size_t(xn) + 2, 0.0);
      const double* zrow = zeros.data() + 1;
      // taps grouped by (ic,kz): one gradient-row load feeds 9 accumulators
      for (std::int64_t ic = 0; ic < ic_n; ++ic) {
        const double* xc = xd + ic * plane;
        for (std::int64_t kz = 0; kz < kz_n; ++kz) {
          const std::int64_t dz = kz - pz;
          const std::int64_t z0 = std::max<std::int64_t>(0, -dz);
          const std::int64_t z1 = std::min(zn, zn - dz);
          VecD::reg d00 = VecD::zero(), d01 = d00, d02 = d00;
          VecD::reg d10 = d00, d11 = d00, d12 = d00;
          VecD::reg d20 = d00, d21 = d00, d22 = d00;
          for (std::int64_t z = z0; z < z1; ++z) {
            const double* xz = xc + (z + dz) * yn * xn;
            for (std::int64_t y = 0; y < yn; ++y) {
              const double* grow = gc + (z * yn + y) * xn;
              const double* r0 = y > 0 ? xz + (y - 1) * xn : zrow;
              const double* r1 = xz + y * xn;
              const double* r2 = y + 1 < yn ? xz + (y + 1) * xn : zrow;
              for (std::int64_t c = 0; c < n_chunks; ++c) {
                const ChunkMasks& m = rm.chunks[std::size_t(c)];
                const std::int64_t off = c * VecD::width;
                const VecD::reg vg = VecD::load(m.center, grow + off);
                d00 = VecD::fmadd(vg, VecD::load(m.left, r0 + off - 1), d00);
                d01 = VecD::fmadd(vg, VecD::load(m.center, r0 + off), d01);
                d02 = VecD::fmadd(vg, VecD::load(m.right, r0 + off + 1), d02);
                d10 = VecD::fmadd(vg, VecD::load(m.left, r1 + off - 1), d10);
                d11 = VecD::fmadd(vg, VecD::load(m.center, r1 + off), d11);
                d12 = VecD::fmadd(vg, VecD::load(m.right, r1 + off + 1), d12);
                d20 = VecD::fmadd(vg, VecD::load(m.left, r2 + off - 1), d20);
                d21 = VecD::fmadd(vg, VecD::load(m.center, r2 + off), d21);
                d22 = VecD::fmadd(vg, VecD::load(m.right, r2 + off + 1), d22);
              }
            }
          }
          double* wg = g_w.data() + ((oc * ic_n + ic) * kz_n + kz) * ky_n * 3;
          wg[0] += VecD::reduce(d00);
          wg[1] += VecD::reduce(d01);
          wg[2] += VecD::reduce(d02);
          wg[3] += VecD::reduce(d10);
          wg[4] += VecD::reduce(d11);
          wg[5] += VecD::reduce(d12);
          wg[6] += VecD::reduce(d20);
          wg[7] += VecD::reduce(d21);
          wg[8] += VecD::reduce(d22);
        }
      }
    });
    return;
  }
#endif

  parallel_for(oc_n, [&](std::int64_t oc) {
    const double* gc = gd + oc * plane;
    double bias_acc = 0.0;
    for (std::int64_t z = 0; z < zn; ++z) {
      for (std::int64_t y = 0; y < yn; ++y) {
        const double* grow = gc + (z * yn + y) * xn;
        if (g_b)
          for (std::int64_t xx = 0; xx < xn; ++xx) bias_acc += grow[xx];
        for (std::int64_t ic = 0; ic < ic_n; ++ic) {
          const double* xc = xd + ic * plane;
          double* wgbase = g_w.data() + ((oc * ic_n + ic) * kz_n) * ky_n * kx_n;
          for (std::int64_t kz = 0; kz < kz_n; ++kz) {
            const std::int64_t zi = z + kz - pz;
            if (zi < 0 || zi >= zn) continue;
            for (std::int64_t ky = 0; ky < ky_n; ++ky) {
              const std::int64_t yi = y + ky - py;
              if (yi < 0 || yi >= yn) continue;
              scalar_row_dots(grow, xc + (zi * yn + yi) * xn,
                              wgbase + (kz * ky_n + ky) * kx_n, xn, kx_n, px);
            }
          }
        }
      }
    }
    if (g_b) g_b->data()[oc] += bias_acc;
  });
}

void relu_forward(const Tensor& x, Tensor& out) {
  out = Tensor(x.shape());
  for (std::int64_t i = 0; i < x.count(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

}  // namespace mriqc
