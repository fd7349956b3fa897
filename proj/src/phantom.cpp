#include "mriqc/phantom.hpp"

#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "mriqc/rng.hpp"

namespace mriqc {

using json = nlohmann::json;

void PhantomSpec::validate() const {
  require(size >= 8, "phantom size must be >= 8, got ", size);
  require(num_classes == 3, "phantom generator produces exactly 3 classes");
  require(radius_lo > 0 && radius_hi >= radius_lo && radius_hi < 0.5,
          "phantom radii must satisfy 0 < lo <= hi < 0.5");
  require(shell_lo >= 1.0 && shell_hi >= shell_lo, "bad shell thickness range");
  require(radius_lo * size > shell_hi + 1.0,
          "phantom radii too small for the shell thickness");
  require(texture_sigma >= 0.0 && smooth_passes >= 0, "bad texture parameters");
}

namespace {

void box_smooth(Volume& v) {
  const Dims d = v.dims();
  Volume out(d, v.spacing());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        double sum = 0.0;
        int count = 0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int xi = x + dx, yi = y + dy, zi = z + dz;
              if (xi < 0 || xi >= d.nx || yi < 0 || yi >= d.ny || zi < 0 ||
                  zi >= d.nz)
                continue;
              sum += v.at(xi, yi, zi);
              ++count;
            }
        out.at(x, y, z) = sum / count;
      }
  v = std::move(out);
}

}  // namespace

std::pair<Volume, LabelVolume> generate(const PhantomSpec& spec, int index) {
  spec.validate();
  Rng rng(seed_for(spec.seed, std::uint64_t(index)));

  const int n = spec.size;
  const double half = n / 2.0;

  // ellipsoid geometry: radii inside bounds, center jittered within the
  // margin the sampled radii leave free (at most 2 voxels)
  std::array<double, 3> center, radius;
  for (int a = 0; a < 3; ++a)
    radius[a] = rng.uniform(spec.radius_lo, spec.radius_hi) * n;
  const double thickness = rng.uniform(spec.shell_lo, spec.shell_hi);
  for (int a = 0; a < 3; ++a) {
    const double margin = std::min(2.0, half - radius[a] - 0.5);
    require(margin >= 0.0, "phantom radii leave no room inside the volume");
    center[a] = half + rng.uniform(-margin, margin);
  }

  for (int a = 0; a < 3; ++a) {
    require(center[a] - radius[a] >= 0.5 && center[a] + radius[a] <= n - 0.5,
            "phantom ellipsoid does not fit inside the volume");
    require(radius[a] - thickness >= 1.0, "phantom core radius collapsed");
  }

  LabelVolume labels({n, n, n}, spec.num_classes);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        auto norm = [&](double p, int a) { return (p - center[a]) / radius[a]; };
        auto norm_core = [&](double p, int a) {
          return (p - center[a]) / (radius[a] - thickness);
        };
        const double outer = norm(x, 0) * norm(x, 0) + norm(y, 1) * norm(y, 1) +
                             norm(z, 2) * norm(z, 2);
        const double inner = norm_core(x, 0) * norm_core(x, 0) +
                             norm_core(y, 1) * norm_core(y, 1) +
                             norm_core(z, 2) * norm_core(z, 2);
        labels.at(x, y, z) = inner <= 1.0 ? 2 : outer <= 1.0 ? 1 : 0;
      }

  const double mean_of[3] = {spec.mean_background + rng.uniform(-1, 1) * spec.intensity_jitter,
                             spec.mean_shell + rng.uniform(-1, 1) * spec.intensity_jitter,
                             spec.mean_core + rng.uniform(-1, 1) * spec.intensity_jitter};
  Volume img({n, n, n});
  for (std::int64_t i = 0; i < img.count(); ++i)
    img.data()[i] = mean_of[labels.data()[i]];
  for (int pass = 0; pass < spec.smooth_passes; ++pass) box_smooth(img);
  if (spec.texture_sigma > 0.0)
    for (auto& v : img.data()) v += rng.normal() * spec.texture_sigma;
  return {normalize_unit(img), std::move(labels)};
}

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  fail("invalid split");
}

namespace {
Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  fail("unknown split '", s, "'");
}

json spec_to_json(const PhantomSpec& s) {
  return json{{"size", s.size},
              {"num_classes", s.num_classes},
              {"radius_lo", s.radius_lo},
              {"radius_hi", s.radius_hi},
              {"shell_lo", s.shell_lo},
              {"shell_hi", s.shell_hi},
              {"mean_background", s.mean_background},
              {"mean_shell", s.mean_shell},
              {"mean_core", s.mean_core},
              {"intensity_jitter", s.intensity_jitter},
              {"smooth_passes", s.smooth_passes},
              {"texture_sigma", s.texture_sigma},
              {"seed", s.seed}};
}

PhantomSpec spec_from_json(const json& j) {
  PhantomSpec s;
  s.size = j.at("size");
  s.num_classes = j.at("num_classes");
  s.radius_lo = j.at("radius_lo");
  s.radius_hi = j.at("radius_hi");
  s.shell_lo = j.at("shell_lo");
  s.shell_hi = j.at("shell_hi");
  s.mean_background = j.at("mean_background");
  s.mean_shell = j.at("mean_shell");
  s.mean_core = j.at("mean_core");
  s.intensity_jitter = j.at("intensity_jitter");
  s.smooth_passes = j.at("smooth_passes");
  s.texture_sigma = j.at("texture_sigma");
  s.seed = j.at("seed");
  return s;
}
}  // namespace

std::vector<int> DatasetManifest::indices(Split split) const {
  std::vector<int> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e.index);
  return out;
}

std::string DatasetManifest::to_json() const {
  json j;
  j["spec"] = spec_to_json(spec);
  json list = json::array();
  for (const auto& e : entries)
    list.push_back({{"index", e.index},
                    {"split", to_string(e.split)},
                    {"image", e.image_path},
                    {"label", e.label_path}});
  j["samples"] = list;
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  json j = json::parse(text);
  DatasetManifest m;
  m.spec = spec_from_json(j.at("spec"));
  for (const auto& item : j.at("samples")) {
    ManifestEntry e;
    e.index = item.at("index");
    e.split = split_from_string(item.at("split"));
    e.image_path = item.at("image");
    e.label_path = item.at("label");
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest make_dataset(const PhantomSpec& spec, int n,
                             const std::array<double, 3>& split_ratios) {
  spec.validate();
  require(n >= 1, "dataset size must be >= 1, got ", n);
  double ratio_sum = split_ratios[0] + split_ratios[1] + split_ratios[2];
  require(std::abs(ratio_sum - 1.0) <= 1e-9, "split ratios must sum to 1, got ",
          ratio_sum);

  std::array<int, 3> counts;
  std::array<double, 3> remainders;
  int assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = split_ratios[s] * n;
    counts[s] = int(std::floor(exact));
    remainders[s] = exact - counts[s];
    assigned += counts[s];
  }
  for (int leftover = n - assigned; leftover > 0; --leftover) {
    int best = 0;
    for (int s = 1; s < 3; ++s)
      if (remainders[s] > remainders[best]) best = s;
    counts[best] += 1;
    remainders[best] = -1.0;
  }
  for (int s = 0; s < 3; ++s)
    require(split_ratios[s] == 0.0 || counts[s] > 0, "dataset of ", n,
            " is too small for a non-empty ", to_string(Split(s)), " split");

  DatasetManifest manifest;
  manifest.spec = spec;
  int next = 0;
  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < counts[s]; ++i)
      manifest.entries.push_back({next++, Split(s), "", ""});
  return manifest;
}

}  // namespace mriqc
