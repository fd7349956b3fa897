#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <set>

#include "mriqc/phantom.hpp"

using namespace mriqc;

TEST_CASE("generation is deterministic in (seed, index)") {
  PhantomSpec spec;
  spec.seed = 42;
  auto [img_a, lab_a] = generate(spec, 3);
  auto [img_b, lab_b] = generate(spec, 3);
  CHECK(img_a == img_b);
  CHECK(lab_a == lab_b);

  auto [img_c, lab_c] = generate(spec, 4);
  CHECK(!(img_a == img_c));
}

TEST_CASE("intensities and labels honor the construction contract") {
  PhantomSpec spec;
  spec.seed = 1;
  for (int index = 0; index < 10; ++index) {
    auto [img, lab] = generate(spec, index);
    CHECK(img.min_value() >= 0.0);
    CHECK(img.max_value() <= 1.0);
    std::set<int> seen;
    for (auto v : lab.data()) seen.insert(v);
    CHECK(seen == std::set<int>({0, 1, 2}));
  }
}

TEST_CASE("shell fraction stays within the geometric bounds") {
  PhantomSpec spec;
  spec.seed = 2;
  for (int index = 0; index < 100; ++index) {
    auto [img, lab] = generate(spec, index);
    std::int64_t shell = 0;
    for (auto v : lab.data())
      if (v == 1) ++shell;
    const double fraction = double(shell) / double(lab.count());
    CHECK(fraction >= 0.02);
    CHECK(fraction <= 0.25);
  }
}

TEST_CASE("shell-background intensity separation holds on every sample") {
  PhantomSpec spec;
  spec.seed = 3;
  for (int index = 0; index < 25; ++index) {
    auto [img, lab] = generate(spec, index);
    double shell_sum = 0.0, bg_sum = 0.0;
    std::int64_t shell_n = 0, bg_n = 0;
    for (std::int64_t i = 0; i < lab.count(); ++i) {
      if (lab.data()[i] == 1) shell_sum += img.data()[i], ++shell_n;
      if (lab.data()[i] == 0) bg_sum += img.data()[i], ++bg_n;
    }
    CHECK(shell_sum / shell_n - bg_sum / bg_n >= 0.3);
  }
}

TEST_CASE("core voxels are nested inside the shell") {
  PhantomSpec spec;
  spec.seed = 4;
  auto [img, lab] = generate(spec, 0);
  const Dims d = lab.dims();
  // walking outward from any core voxel along +x must hit shell before
  // background
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (lab.at(x, y, z) != 2) continue;
        bool saw_shell = false;
        for (int xi = x; xi < d.nx; ++xi) {
          if (lab.at(xi, y, z) == 1) saw_shell = true;
          if (lab.at(xi, y, z) == 0) break;
        }
        CHECK(saw_shell);
      }
}

TEST_CASE("generation throughput exceeds 50 phantoms per second") {
  PhantomSpec spec;
  spec.seed = 5;
  const auto t0 = std::chrono::steady_clock::now();
  const int n = 60;
  for (int i = 0; i < n; ++i) (void)generate(spec, i);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  CHECK(double(n) / secs >= 50.0);
}

TEST_CASE("dataset split sizes follow the floor-then-distribute rule") {
  PhantomSpec spec;
  auto m100 = make_dataset(spec, 100, {0.8, 0.1, 0.1});
  CHECK(m100.indices(Split::Train).size() == 80);
  CHECK(m100.indices(Split::Valid).size() == 10);
  CHECK(m100.indices(Split::Test).size() == 10);

  auto m10 = make_dataset(spec, 10, {0.8, 0.1, 0.1});
  CHECK(m10.indices(Split::Train).size() == 8);
  CHECK(m10.indices(Split::Valid).size() == 1);
  CHECK(m10.indices(Split::Test).size() == 1);
}

TEST_CASE("splits are disjoint and cover every index") {
  PhantomSpec spec;
  auto m = make_dataset(spec, 57, {0.8, 0.1, 0.1});
  std::set<int> all;
  for (auto s : {Split::Train, Split::Valid, Split::Test})
    for (int idx : m.indices(s)) CHECK(all.insert(idx).second);
  CHECK(all.size() == 57);
}

TEST_CASE("too-small datasets are rejected") {
  PhantomSpec spec;
  CHECK_THROWS_AS(make_dataset(spec, 3, {0.8, 0.1, 0.1}), Error);
  CHECK_THROWS_AS(make_dataset(spec, 10, {0.5, 0.4, 0.2}), Error);
}

TEST_CASE("manifests round-trip through json") {
  PhantomSpec spec;
  spec.seed = 9;
  auto m = make_dataset(spec, 20, {0.8, 0.1, 0.1});
  m.entries[0].image_path = "img_0000.nii";
  m.entries[0].label_path = "lab_0000.nii";
  auto back = DatasetManifest::from_json(m.to_json());
  CHECK(back.spec.seed == spec.seed);
  REQUIRE(back.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].index == m.entries[i].index);
    CHECK(back.entries[i].split == m.entries[i].split);
    CHECK(back.entries[i].image_path == m.entries[i].image_path);
  }
}
