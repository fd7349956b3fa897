#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "mriqc/fft.hpp"
#include "mriqc/rng.hpp"

using namespace mriqc;
using cd = std::complex<double>;

namespace {

ComplexVolume random_complex(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  ComplexVolume v(d);
  for (auto& c : v.data()) c = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return v;
}

double max_abs_diff(const ComplexVolume& a, const ComplexVolume& b) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.count(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("fft3 of zeros is zero") {
  ComplexVolume v({8, 8, 8});
  auto k = fft3(v);
  for (auto& c : k.data()) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("fft3 of a constant concentrates in the DC bin") {
  Volume v({8, 8, 8});
  for (auto& x : v.data()) x = 3.25;
  auto k = fft3(v);
  CHECK(std::abs(k.at(0, 0, 0) - cd{3.25 * 512.0, 0.0}) <= 1e-9);
  for (std::int64_t i = 1; i < k.count(); ++i) CHECK(std::abs(k.data()[i]) <= 1e-9);
}

TEST_CASE("fft3 matches the naive DFT on a mixed-radix volume") {
  auto v = random_complex({6, 5, 4}, 42);
  auto fast = fft3(v);
  auto slow = dft3_naive(v);
  CHECK(max_abs_diff(fast, slow) <= 1e-9);
}

TEST_CASE("ifft3 matches the naive inverse DFT") {
  auto v = random_complex({6, 5, 4}, 43);
  auto fast = ifft3(v);
  auto slow = dft3_naive(v, FftDirection::Inverse);
  CHECK(max_abs_diff(fast, slow) <= 1e-9);
}

TEST_CASE("roundtrip identity on power-of-two and mixed-radix sizes") {
  for (Dims d : {Dims{8, 8, 8}, Dims{12, 10, 7}, Dims{13, 1, 3}}) {
    auto v = random_complex(d, 50 + d.nx);
    CHECK(max_abs_diff(ifft3(fft3(v)), v) <= 1e-9);
  }
}

TEST_CASE("delta at the k-space origin inverts to a constant image") {
  ComplexVolume k({8, 4, 2});
  k.at(0, 0, 0) = cd{double(k.count()), 0.0};
  auto img = ifft3(k);
  for (auto& c : img.data()) CHECK(std::abs(c - cd{1.0, 0.0}) <= 1e-9);
}

TEST_CASE("dft3_naive base cases") {
  ComplexVolume one({1, 1, 1});
  one.at(0, 0, 0) = cd{2.5, -1.0};
  auto k1 = dft3_naive(one);
  CHECK(std::abs(k1.at(0, 0, 0) - cd{2.5, -1.0}) <= 1e-12);

  ComplexVolume two({2, 1, 1});
  two.at(0, 0, 0) = cd{1.0, 2.0};
  two.at(1, 0, 0) = cd{-0.5, 0.25};
  auto k2 = dft3_naive(two);
  CHECK(std::abs(k2.at(0, 0, 0) - (two.at(0, 0, 0) + two.at(1, 0, 0))) <= 1e-12);
  CHECK(std::abs(k2.at(1, 0, 0) - (two.at(0, 0, 0) - two.at(1, 0, 0))) <= 1e-12);
}

TEST_CASE("dft3_naive agrees with fft3 on 4^3") {
  auto v = random_complex({4, 4, 4}, 44);
  CHECK(max_abs_diff(fft3(v), dft3_naive(v)) <= 1e-10);
}

TEST_CASE("dft3_naive rejects oversized volumes") {
  ComplexVolume big({17, 17, 17});
  CHECK_THROWS_AS(dft3_naive(big), Error);
}

TEST_CASE("linearity") {
  auto a = random_complex({6, 5, 4}, 45);
  auto b = random_complex({6, 5, 4}, 46);
  const cd alpha{0.7, -0.2}, beta{-1.3, 0.4};
  ComplexVolume lin(a.dims());
  for (std::int64_t i = 0; i < a.count(); ++i)
    lin.data()[i] = alpha * a.data()[i] + beta * b.data()[i];
  auto lhs = fft3(lin);
  auto fa = fft3(a);
  auto fb = fft3(b);
  double scale = 0.0;
  for (auto& c : lhs.data()) scale = std::max(scale, std::abs(c));
  for (std::int64_t i = 0; i < a.count(); ++i) {
    cd rhs = alpha * fa.data()[i] + beta * fb.data()[i];
    CHECK(std::abs(lhs.data()[i] - rhs) <= 1e-9 * scale);
  }
}

TEST_CASE("parseval") {
  for (Dims d : {Dims{8, 8, 8}, Dims{9, 7, 5}}) {
    auto v = random_complex(d, 60 + d.nx);
    auto k = fft3(v);
    double image_energy = 0.0, spectral_energy = 0.0;
    for (auto& c : v.data()) image_energy += std::norm(c);
    for (auto& c : k.data()) spectral_energy += std::norm(c);
    spectral_energy /= double(v.count());
    CHECK(std::abs(image_energy - spectral_energy) <= 1e-9 * image_energy);
  }
}

TEST_CASE("conjugate symmetry for real input") {
  Rng rng(99);
  Volume v({6, 5, 4});
  for (auto& x : v.data()) x = rng.uniform(-1, 1);
  auto k = fft3(v);
  const int nx = 6, ny = 5, nz = 4;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        cd mirrored = k.at((nx - x) % nx, (ny - y) % ny, (nz - z) % nz);
        CHECK(std::abs(k.at(x, y, z) - std::conj(mirrored)) <= 1e-9);
      }
}

TEST_CASE("roundtrip stays tight up to 64^3") {
  auto v = random_complex({64, 64, 64}, 70);
  CHECK(max_abs_diff(ifft3(fft3(v)), v) <= 1e-9);
}
