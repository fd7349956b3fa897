#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "mriqc/rng.hpp"
#include "mriqc/volume.hpp"

using namespace mriqc;

namespace {
Volume random_volume(Dims d, std::uint64_t seed, double lo = -2.0, double hi = 3.0) {
  Rng rng(seed);
  Volume v(d);
  for (auto& x : v.data()) x = rng.uniform(lo, hi);
  return v;
}
}  // namespace

TEST_CASE("normalize_unit leaves unit-range data unchanged") {
  Volume v({3, 1, 1}, {}, {0.0, 0.5, 1.0});
  auto out = normalize_unit(v);
  CHECK(out.data() == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("normalize_unit maps a constant volume to all zeros") {
  Volume v({2, 2, 2}, {}, std::vector<double>(8, 7.0));
  auto out = normalize_unit(v);
  for (double x : out.data()) CHECK(x == 0.0);
}

TEST_CASE("normalize_unit rescales affinely") {
  Volume v({3, 1, 1}, {}, {2.0, 4.0, 6.0});
  auto out = normalize_unit(v);
  CHECK(out.data()[0] == doctest::Approx(0.0));
  CHECK(out.data()[1] == doctest::Approx(0.5));
  CHECK(out.data()[2] == doctest::Approx(1.0));
}

TEST_CASE("normalize_unit rejects non-finite input") {
  Volume v({2, 1, 1}, {}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(normalize_unit(v), Error);
}

TEST_CASE("normalize_unit is idempotent") {
  auto v = random_volume({5, 4, 3}, 1);
  auto once = normalize_unit(v);
  auto twice = normalize_unit(once);
  for (std::int64_t i = 0; i < v.count(); ++i)
    CHECK(std::abs(once.data()[i] - twice.data()[i]) <= 1e-12);
}

TEST_CASE("normalize_unit preserves extremum locations") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto v = random_volume({6, 5, 4}, 100 + seed);
    auto out = normalize_unit(v);
    CHECK(out.argmax() == v.argmax());
    CHECK(out.argmin() == v.argmin());
  }
}

TEST_CASE("magnitude of all-zero complex volume is zero") {
  ComplexVolume k({4, 4, 4});
  auto m = magnitude(k);
  for (double x : m.data()) CHECK(x == 0.0);
}

TEST_CASE("magnitude is pythagorean") {
  ComplexVolume k({2, 2, 2});
  for (auto& c : k.data()) c = {3.0, 4.0};
  auto m = magnitude(k);
  for (double x : m.data()) CHECK(x == doctest::Approx(5.0));
}

TEST_CASE("magnitude matches element-wise oracle and is non-negative") {
  Rng rng(7);
  ComplexVolume k({4, 4, 4});
  for (auto& c : k.data()) c = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
  auto m = magnitude(k);
  for (std::int64_t i = 0; i < k.count(); ++i) {
    double re = k.data()[i].real(), im = k.data()[i].imag();
    CHECK(m.data()[i] == doctest::Approx(std::sqrt(re * re + im * im)).epsilon(1e-14));
    CHECK(m.data()[i] >= 0.0);
  }
}

TEST_CASE("container invariants are enforced") {
  CHECK_THROWS_AS(Volume({0, 2, 2}), Error);
  CHECK_THROWS_AS(Volume({2, 2, 2}, {1, -1, 1}), Error);
  CHECK_THROWS_AS(Volume({2, 2, 2}, {}, std::vector<double>(7, 0.0)), Error);
  CHECK_THROWS_AS(LabelVolume({2, 2, 2}, 2, std::vector<std::uint8_t>(8, 5)), Error);
  CHECK_THROWS_AS(UncertaintyMap({2, 2, 2}, {"a", "a"}), Error);

  UncertaintyMap u({2, 2, 2}, {"task", "noise"});
  CHECK(u.channel_index("noise") == 1);
  CHECK_THROWS_AS(u.channel_index("blur"), Error);
  u.channel(0)[0] = 800.0;  // exp overflows
  CHECK_THROWS_AS(u.validate(), Error);
}
