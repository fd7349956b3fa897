#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mriqc/qc_report.hpp"
#include "mriqc/rng.hpp"

using namespace mriqc;

namespace {

ClassProbabilities uniform_probs(Dims d, int classes) {
  ClassProbabilities p;
  p.dims = d;
  p.num_classes = classes;
  p.data.assign(std::size_t(classes) * d.count(), 1.0 / classes);
  return p;
}

ClassProbabilities one_hot_probs(Dims d, int classes, const LabelVolume& labels) {
  ClassProbabilities p;
  p.dims = d;
  p.num_classes = classes;
  p.data.assign(std::size_t(classes) * d.count(), 0.0);
  for (std::int64_t i = 0; i < d.count(); ++i)
    p.data[std::size_t(labels.data()[i]) * d.count() + i] = 1.0;
  return p;
}

ClassProbabilities random_probs(Dims d, int classes, std::uint64_t seed) {
  Rng rng(seed);
  ClassProbabilities p;
  p.dims = d;
  p.num_classes = classes;
  p.data.assign(std::size_t(classes) * d.count(), 0.0);
  for (std::int64_t i = 0; i < d.count(); ++i) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double v = rng.uniform(0.01, 1.0);
      p.data[std::size_t(c) * d.count() + i] = v;
      sum += v;
    }
    for (int c = 0; c < classes; ++c) p.data[std::size_t(c) * d.count() + i] /= sum;
  }
  return p;
}

}  // namespace

TEST_CASE("entropy of one-hot voxels is zero") {
  Dims d{3, 3, 3};
  LabelVolume labels(d, 3);
  Rng rng(1);
  for (auto& l : labels.data()) l = std::uint8_t(rng.uniform_int(3));
  auto h = entropy_map(one_hot_probs(d, 3, labels));
  for (double v : h.data()) CHECK(v == 0.0);
}

TEST_CASE("entropy of a uniform distribution is ln C") {
  auto h = entropy_map(uniform_probs({2, 2, 2}, 3));
  for (double v : h.data()) CHECK(v == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("entropy direct evaluation") {
  ClassProbabilities p;
  p.dims = {1, 1, 1};
  p.num_classes = 2;
  p.data = {0.7, 0.3};
  auto h = entropy_map(p);
  CHECK(h.data()[0] == doctest::Approx(0.61086).epsilon(1e-4));
}

TEST_CASE("entropy stays within [0, ln C] on random inputs") {
  auto p = random_probs({6, 5, 4}, 4, 2);
  auto h = entropy_map(p);
  for (double v : h.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= std::log(4.0) + 1e-12);
  }
}

TEST_CASE("unnormalized probabilities are rejected") {
  ClassProbabilities p;
  p.dims = {1, 1, 1};
  p.num_classes = 2;
  p.data = {0.6, 0.6};
  CHECK_THROWS_AS(entropy_map(p), Error);
}

TEST_CASE("decompose of a single channel equals that channel") {
  UncertaintyMap u({4, 4, 4}, {"task"});
  Rng rng(3);
  for (auto& s : u.data()) s = rng.uniform(-2.0, 0.5);
  auto summary = decompose(u);
  REQUIRE(summary.sources.size() == 1);
  CHECK(summary.total.mean == doctest::Approx(summary.sources[0].mean).epsilon(1e-12));
  CHECK(summary.total.max == doctest::Approx(summary.sources[0].max).epsilon(1e-12));
}

TEST_CASE("decompose totals add constant channels") {
  UncertaintyMap u({3, 3, 3}, {"a", "b"});
  for (std::int64_t i = 0; i < 27; ++i) {
    u.channel(0)[i] = std::log(0.1);
    u.channel(1)[i] = std::log(0.3);
  }
  auto summary = decompose(u);
  CHECK(summary.total.mean == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("decompose total map is the voxelwise sum and order-invariant") {
  UncertaintyMap u({4, 3, 2}, {"a", "b", "c"});
  Rng rng(4);
  for (auto& s : u.data()) s = rng.uniform(-1.5, 0.5);
  auto summary = decompose(u);

  const std::int64_t n = u.dims().count();
  std::vector<double> manual(std::size_t(n), 0.0);
  for (int k = 0; k < 3; ++k)
    for (std::int64_t i = 0; i < n; ++i)
      manual[std::size_t(i)] += std::exp(u.channel(k)[i]);
  double mean = 0.0, mx = manual[0];
  for (double v : manual) {
    mean += v;
    mx = std::max(mx, v);
  }
  mean /= double(n);
  CHECK(std::abs(summary.total.mean - mean) <= 1e-12);
  CHECK(std::abs(summary.total.max - mx) <= 1e-12);

  // permuting the channels leaves the totals unchanged
  UncertaintyMap perm({4, 3, 2}, {"c", "a", "b"});
  std::copy_n(u.channel(2), n, perm.channel(0));
  std::copy_n(u.channel(0), n, perm.channel(1));
  std::copy_n(u.channel(1), n, perm.channel(2));
  auto permuted = decompose(perm);
  CHECK(permuted.total.mean == doctest::Approx(summary.total.mean).epsilon(1e-13));
  CHECK(permuted.total.p95 == doctest::Approx(summary.total.p95).epsilon(1e-13));
}

TEST_CASE("one-hot probabilities at the baseline give zero-width intervals") {
  Dims d{4, 4, 4};
  LabelVolume labels(d, 3);
  Rng rng(5);
  for (auto& l : labels.data()) l = std::uint8_t(rng.uniform_int(3));
  auto p = one_hot_probs(d, 3, labels);
  auto bars = volume_error_bars(p, 0.5);
  std::int64_t count_c1 = 0;
  for (auto l : labels.data()) count_c1 += l == 1;
  CHECK(bars[1].estimate == doctest::Approx(double(count_c1)).epsilon(1e-12));
  for (const auto& bar : bars) {
    CHECK(bar.ci_low == doctest::Approx(bar.estimate).epsilon(1e-12));
    CHECK(bar.ci_high == doctest::Approx(bar.estimate).epsilon(1e-12));
  }
}

TEST_CASE("at the baseline entropy the scale factor is exactly one") {
  auto p = random_probs({4, 4, 4}, 3, 6);
  auto h = entropy_map(p);
  double mean_h = 0.0;
  for (double v : h.data()) mean_h += v;
  mean_h /= double(h.count());

  auto bars = volume_error_bars(p, mean_h);
  // pure Bernoulli term
  for (int c = 0; c < 3; ++c) {
    double bernoulli = 0.0;
    for (std::int64_t i = 0; i < p.dims.count(); ++i)
      bernoulli += p.at(c, i) * (1.0 - p.at(c, i));
    CHECK(bars[std::size_t(c)].ci_high - bars[std::size_t(c)].estimate ==
          doctest::Approx(std::sqrt(bernoulli)).epsilon(1e-9));
  }

  // a lower baseline widens the interval
  auto wider = volume_error_bars(p, mean_h * 0.5);
  CHECK(wider[1].ci_high - wider[1].ci_low > bars[1].ci_high - bars[1].ci_low);
}

TEST_CASE("missing baseline is rejected") {
  auto p = random_probs({2, 2, 2}, 2, 7);
  CHECK_THROWS_AS(volume_error_bars(p, 0.0), Error);
  CHECK_THROWS_AS(volume_error_bars(p, std::nan("")), Error);
}

TEST_CASE("reports round-trip through their serialization") {
  auto p = random_probs({4, 4, 4}, 3, 8);
  UncertaintyMap u({4, 4, 4}, {"task", "knoise"});
  Rng rng(9);
  for (auto& s : u.data()) s = rng.uniform(-2.0, 0.0);
  auto report = make_report(p, u, 0.4, {{"task", 0.5}, {"knoise", 0.1}}, 0x1234, 0x5678);
  auto back = QcReport::from_json(report.to_json());
  CHECK(back == report);
  CHECK(report.source_flags.size() == 2);
}

TEST_CASE("montage layout: 3 slices by 2+K panels") {
  Dims d{10, 12, 8};
  Volume input(d);
  Rng rng(10);
  for (auto& v : input.data()) v = rng.uniform01();
  LabelVolume labels(d, 3);
  for (auto& l : labels.data()) l = std::uint8_t(rng.uniform_int(3));
  UncertaintyMap u(d, {"task", "knoise", "lowpass"});
  for (auto& s : u.data()) s = rng.uniform(-1.0, 0.0);

  auto path = std::filesystem::temp_directory_path() / "mriqc_montage.pgm";
  write_montage(path.string(), input, labels, u);

  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  CHECK(magic == "P5");
  const int cell_w = std::max(d.nx, d.ny);
  const int cell_h = std::max(d.ny, d.nz);
  CHECK(width == (2 + 3) * cell_w);
  CHECK(height == 3 * cell_h);
  CHECK(maxval == 255);
  std::filesystem::remove(path);
}

TEST_CASE("error bar csv rows match the requested levels") {
  std::vector<ErrorBarRow> rows;
  for (const char* level : {"30", "10", "0", "-10"}) {
    ErrorBarRow row;
    row.level = level;
    row.classes = {{100.0, 95.0, 105.0}, {50.0, 48.0, 52.0}};
    rows.push_back(std::move(row));
  }
  auto path = std::filesystem::temp_directory_path() / "mriqc_bars.csv";
  write_error_bar_csv(path.string(), rows);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "level,class0_estimate,class0_ci_low,class0_ci_high,class1_estimate,"
        "class1_ci_low,class1_ci_high");
  int count = 0;
  for (std::string line; std::getline(in, line);) ++count;
  CHECK(count == 4);
  std::filesystem::remove(path);
}
