#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mriqc/cascade.hpp"
#include "mriqc/rng.hpp"

using namespace mriqc;

namespace {

// small, fast configuration for plumbing tests
TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.iterations = 12;
  cfg.batch_size = 1;
  cfg.patch_size = 16;
  cfg.validation_cadence = 4;
  cfg.validation_count = 2;
  cfg.seed = 11;
  cfg.net.hidden = {4, 4};
  return cfg;
}

DataSet tiny_data(std::uint64_t seed) {
  PhantomSpec spec;
  spec.size = 16;
  spec.shell_lo = 1.5;
  spec.shell_hi = 2.5;
  spec.radius_lo = 0.30;
  spec.radius_hi = 0.42;
  spec.seed = seed;
  auto manifest = make_dataset(spec, 12, {0.8, 0.1, 0.1});
  return materialize(manifest);
}

}  // namespace

TEST_CASE("zero iterations returns the initialized model unchanged") {
  auto cfg = tiny_config();
  cfg.iterations = 0;
  auto data = tiny_data(1);
  auto result = train_task(data, cfg);
  NetConfig net = cfg.net;
  net.channel_names = {"task"};
  net.seed = seed_for(cfg.seed, "init-task");
  auto fresh = init(net);
  CHECK(result.model.checksum() == fresh.checksum());
  CHECK(!result.diverged);
}

TEST_CASE("task training is deterministic across runs") {
  auto cfg = tiny_config();
  auto data = tiny_data(2);
  auto a = train_task(data, cfg);
  auto b = train_task(data, cfg);
  CHECK(a.model.checksum() == b.model.checksum());
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i)
    CHECK(a.log[i].total_loss == b.log[i].total_loss);
}

TEST_CASE("training reduces the task loss on a tiny run") {
  auto cfg = tiny_config();
  cfg.iterations = 60;
  auto data = tiny_data(3);
  auto result = train_task(data, cfg);
  REQUIRE(result.log.size() == 60);
  const double first = result.log.front().total_loss;
  const double last = result.log.back().total_loss;
  CHECK(std::isfinite(first));
  CHECK(last < first);
}

TEST_CASE("stage ordering contracts are enforced") {
  auto cfg = tiny_config();
  auto data = tiny_data(4);
  auto task = train_task(data, cfg);

  // unfrozen task model is rejected
  CHECK_THROWS_WITH_AS(
      train_teacher(task.model, AugmentationKind::KNoise, data, cfg),
      doctest::Contains("frozen"), Error);

  auto frozen = freeze(task.model);
  CHECK_THROWS_WITH_AS(train_student(frozen, {}, data, cfg),
                       doctest::Contains("teacher"), Error);
}

TEST_CASE("teacher training leaves the frozen task network bit-identical") {
  auto cfg = tiny_config();
  auto data = tiny_data(5);
  auto task = freeze(train_task(data, cfg).model);
  const auto before = task.checksum();
  auto teacher = train_teacher(task, AugmentationKind::KNoise, data, cfg);
  CHECK(task.checksum() == before);
  CHECK(!teacher.diverged);
  CHECK(teacher.model.config.channel_names ==
        std::vector<std::string>{"task", "knoise"});
}

TEST_CASE("the full cascade runs, saves checkpoints and stays deterministic") {
  auto cfg = tiny_config();
  cfg.registry = {AugmentationKind::KNoise, AugmentationKind::LowPass};
  auto data = tiny_data(6);

  auto dir_a = std::filesystem::temp_directory_path() / "mriqc_cascade_a";
  auto dir_b = std::filesystem::temp_directory_path() / "mriqc_cascade_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);

  auto a = run_cascade(data, cfg, dir_a.string());
  auto b = run_cascade(data, cfg, dir_b.string());
  CHECK(a.task.checksum() == b.task.checksum());
  CHECK(a.student.checksum() == b.student.checksum());
  REQUIRE(a.teachers.size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(a.teachers[i].checksum() == b.teachers[i].checksum());

  // checkpoint layout and reload
  for (const char* stage : {"task", "teacher-knoise", "teacher-lowpass", "student"}) {
    CHECK(std::filesystem::exists(dir_a / stage / "manifest.json"));
    CHECK(std::filesystem::exists(dir_a / stage / "train_log.csv"));
    auto loaded = load_checkpoint((dir_a / stage).string());
    CHECK(loaded.provenance == stage);
  }
  auto reloaded = load_checkpoint((dir_a / "student").string());
  CHECK(reloaded.checksum() == a.student.checksum());
  CHECK(reloaded.config.channel_names ==
        std::vector<std::string>{"task", "knoise", "lowpass"});

  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("student channels follow the registry order") {
  auto cfg = tiny_config();
  cfg.iterations = 2;
  cfg.registry = {AugmentationKind::LowPass, AugmentationKind::KNoise};
  auto data = tiny_data(7);
  auto task = freeze(train_task(data, cfg).model);
  std::vector<SegModel> teachers;
  for (auto kind : cfg.registry)
    teachers.push_back(freeze(train_teacher(task, kind, data, cfg).model));
  auto student = train_student(task, teachers, data, cfg);
  CHECK(student.model.config.channel_names ==
        std::vector<std::string>{"task", "lowpass", "knoise"});

  // teacher list in the wrong order is rejected
  std::swap(teachers[0], teachers[1]);
  CHECK_THROWS_WITH_AS(train_student(task, teachers, data, cfg),
                       doctest::Contains("registry"), Error);
}

TEST_CASE("inference output contracts") {
  auto cfg = tiny_config();
  cfg.iterations = 4;
  auto data = tiny_data(8);
  auto model = train_task(data, cfg).model;
  const Sample& s = data.test.front();

  auto result = infer(model, s.image, cfg.patch_size);
  CHECK(result.labels.dims() == s.image.dims());
  CHECK(result.uncertainty.channels() == 1);

  // probabilities sum to one per voxel
  for (std::int64_t i = 0; i < s.image.count(); ++i) {
    double sum = 0.0;
    for (int c = 0; c < result.probabilities.num_classes; ++c)
      sum += result.probabilities.at(c, i);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }

  // determinism
  auto again = infer(model, s.image, cfg.patch_size);
  CHECK(again.probabilities.data == result.probabilities.data);
  CHECK(again.labels == result.labels);

  // volume smaller than the patch takes the padded path
  PhantomSpec small_spec;
  small_spec.size = 12;
  small_spec.shell_lo = 1.0;
  small_spec.shell_hi = 2.0;
  small_spec.radius_lo = 0.32;
  small_spec.radius_hi = 0.42;
  small_spec.seed = 99;
  auto [small_img, small_lab] = generate(small_spec, 0);
  auto padded = infer(model, small_img, cfg.patch_size);
  CHECK(padded.labels.dims() == small_img.dims());

  // volume larger than the patch takes the sliding-window path
  PhantomSpec big_spec;
  big_spec.size = 24;
  big_spec.seed = 100;
  auto [big_img, big_lab] = generate(big_spec, 0);
  auto slid = infer(model, big_img, cfg.patch_size);
  CHECK(slid.labels.dims() == big_img.dims());
}

TEST_CASE("dice helper") {
  LabelVolume a({4, 1, 1}, 2, {1, 1, 0, 0});
  LabelVolume b({4, 1, 1}, 2, {1, 0, 0, 0});
  CHECK(dice(a, b, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(dice(a, a, 1) == 1.0);
  LabelVolume empty_a({2, 1, 1}, 2, {0, 0});
  LabelVolume empty_b({2, 1, 1}, 2, {0, 0});
  CHECK(dice(empty_a, empty_b, 1) == 1.0);
}

TEST_CASE("training log csv has the contracted columns") {
  auto cfg = tiny_config();
  cfg.iterations = 4;
  auto data = tiny_data(9);
  auto result = train_task(data, cfg);
  auto path = std::filesystem::temp_directory_path() / "mriqc_log.csv";
  write_training_log(path.string(), result.log);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "iteration,stage,total_loss,ce_term,logvar_term,match_l1,match_grad,"
        "match_ssim,epsilon,lr,val_dice");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 4);
  std::filesystem::remove(path);
}
