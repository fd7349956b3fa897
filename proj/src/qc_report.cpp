#include "mriqc/qc_report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace mriqc {

using json = nlohmann::json;

Volume entropy_map(const ClassProbabilities& p) {
  require(p.num_classes >= 2, "entropy_map: need at least two classes");
  const std::int64_t n = p.dims.count();
  require(std::int64_t(p.data.size()) == std::int64_t(p.num_classes) * n,
          "entropy_map: data length does not match dims");
  Volume out(p.dims);
  for (std::int64_t i = 0; i < n; ++i) {
    double sum = 0.0, h = 0.0;
    for (int c = 0; c < p.num_classes; ++c) {
      const double pc = p.at(c, i);
      require(pc >= 0.0, "entropy_map: negative probability at voxel ", i);
      sum += pc;
      if (pc > 0.0) h -= pc * std::log(pc);
    }
    require(std::abs(sum - 1.0) <= 1e-6,
            "entropy_map: probabilities sum to ", sum, " at voxel ", i);
    out.data()[i] = h;
  }
  return out;
}

namespace {

ChannelStats stats_of(const std::string& name, std::vector<double> values) {
  ChannelStats s;
  s.name = name;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / double(values.size());
  s.max = *std::max_element(values.begin(), values.end());
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      std::size_t(std::ceil(0.95 * double(values.size()))) - 1;  // nearest rank
  s.p95 = values[std::min(rank, values.size() - 1)];
  return s;
}

}  // namespace

UncertaintySummary decompose(const UncertaintyMap& u) {
  UncertaintySummary out;
  const std::int64_t n = u.dims().count();
  std::vector<double> total(std::size_t(n), 0.0);
  for (int k = 0; k < u.channels(); ++k) {
    std::vector<double> var(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      var[std::size_t(i)] = std::exp(u.channel(k)[i]);
      total[std::size_t(i)] += var[std::size_t(i)];
    }
    out.sources.push_back(stats_of(u.channel_names()[std::size_t(k)], std::move(var)));
  }
  out.total = stats_of("total", std::move(total));
  return out;
}

std::vector<ClassInterval> volume_error_bars(const ClassProbabilities& p,
                                             double clean_baseline_entropy_mean) {
  require(std::isfinite(clean_baseline_entropy_mean) &&
              clean_baseline_entropy_mean > 0.0,
          "volume_error_bars: a clean-run baseline entropy is required");
  Volume h = entropy_map(p);
  double mean_h = 0.0;
  for (double v : h.data()) mean_h += v;
  mean_h /= double(h.count());
  const double scale =
      std::max(0.0, mean_h - clean_baseline_entropy_mean) / clean_baseline_entropy_mean +
      1.0;

  std::vector<ClassInterval> out;
  const std::int64_t n = p.dims.count();
  for (int c = 0; c < p.num_classes; ++c) {
    double estimate = 0.0, bernoulli = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double pc = p.at(c, i);
      estimate += pc;
      bernoulli += pc * (1.0 - pc);
    }
    const double sd = std::sqrt(bernoulli * scale);
    out.push_back({estimate, estimate - sd, estimate + sd});
  }
  return out;
}

QcReport make_report(const ClassProbabilities& probabilities, const UncertaintyMap& u,
                     double baseline_entropy_mean,
                     const std::map<std::string, double>& thresholds,
                     std::uint64_t model_checksum, std::uint64_t input_checksum) {
  QcReport report;
  report.uncertainty = decompose(u);
  Volume h = entropy_map(probabilities);
  for (double v : h.data()) report.mean_entropy += v;
  report.mean_entropy /= double(h.count());
  report.class_volumes = volume_error_bars(probabilities, baseline_entropy_mean);
  report.source_thresholds = thresholds;
  for (const auto& src : report.uncertainty.sources) {
    auto it = thresholds.find(src.name);
    if (it != thresholds.end()) report.source_flags[src.name] = src.mean > it->second;
  }
  report.model_checksum = model_checksum;
  report.input_checksum = input_checksum;
  return report;
}

// ---- serialization -------------------------------------------------------------

namespace {

json stats_to_json(const ChannelStats& s) {
  return json{{"name", s.name}, {"mean", s.mean}, {"max", s.max}, {"p95", s.p95}};
}

ChannelStats stats_from_json(const json& j) {
  return {j.at("name"), j.at("mean"), j.at("max"), j.at("p95")};
}

}  // namespace

std::string QcReport::to_json() const {
  json j;
  json sources = json::array();
  for (const auto& s : uncertainty.sources) sources.push_back(stats_to_json(s));
  j["uncertainty"] = {{"sources", sources}, {"total", stats_to_json(uncertainty.total)}};
  j["mean_entropy"] = mean_entropy;
  json vols = json::array();
  for (const auto& c : class_volumes)
    vols.push_back({{"estimate", c.estimate}, {"ci_low", c.ci_low}, {"ci_high", c.ci_high}});
  j["class_volumes"] = vols;
  j["source_flags"] = source_flags;
  j["source_thresholds"] = source_thresholds;
  j["model_checksum"] = model_checksum;
  j["input_checksum"] = input_checksum;
  return j.dump(2);
}

QcReport QcReport::from_json(const std::string& text) {
  json j = json::parse(text);
  QcReport r;
  for (const auto& s : j.at("uncertainty").at("sources"))
    r.uncertainty.sources.push_back(stats_from_json(s));
  r.uncertainty.total = stats_from_json(j.at("uncertainty").at("total"));
  r.mean_entropy = j.at("mean_entropy");
  for (const auto& c : j.at("class_volumes"))
    r.class_volumes.push_back({c.at("estimate"), c.at("ci_low"), c.at("ci_high")});
  r.source_flags = j.at("source_flags").get<std::map<std::string, bool>>();
  r.source_thresholds = j.at("source_thresholds").get<std::map<std::string, double>>();
  r.model_checksum = j.at("model_checksum");
  r.input_checksum = j.at("input_checksum");
  return r;
}

// ---- images ------------------------------------------------------------------------

void write_pgm(const std::string& path, int width, int height,
               const std::vector<unsigned char>& pixels) {
  require(std::int64_t(pixels.size()) == std::int64_t(width) * height,
          "write_pgm: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open ", path, " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            std::streamsize(pixels.size()));
  require(out.good(), "short write to ", path);
}

namespace {

// extracts a mid-slice as rows x cols of doubles
std::vector<double> mid_slice(const Volume& v, int orientation, int& rows, int& cols) {
  const Dims d = v.dims();
  std::vector<double> out;
  if (orientation == 0) {  // axial: z fixed
    rows = d.ny, cols = d.nx;
    const int z = d.nz / 2;
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) out.push_back(v.at(x, y, z));
  } else if (orientation == 1) {  // coronal: y fixed
    rows = d.nz, cols = d.nx;
    const int y = d.ny / 2;
    for (int z = 0; z < d.nz; ++z)
      for (int x = 0; x < d.nx; ++x) out.push_back(v.at(x, y, z));
  } else {  // sagittal: x fixed
    rows = d.nz, cols = d.ny;
    const int x = d.nx / 2;
    for (int z = 0; z < d.nz; ++z)
      for (int y = 0; y < d.ny; ++y) out.push_back(v.at(x, y, z));
  }
  return out;
}

}  // namespace

void write_montage(const std::string& path, const Volume& input,
                   const LabelVolume& labels, const UncertaintyMap& u) {
  require(input.dims() == labels.dims() && input.dims() == u.dims(),
          "write_montage: dims mismatch");
  const int panels = 2 + u.channels();
  const Dims d = input.dims();
  const int cell_w = std::max({d.nx, d.ny});
  const int cell_h = std::max({d.ny, d.nz});
  const int width = panels * cell_w;
  const int height = 3 * cell_h;
  std::vector<unsigned char> pixels(std::size_t(width) * height, 0);

  Volume label_img(d);
  for (std::int64_t i = 0; i < d.count(); ++i)
    label_img.data()[i] = double(labels.data()[i]);

  std::vector<Volume> channel_img;
  for (int k = 0; k < u.channels(); ++k) {
    Volume c(d);
    std::copy_n(u.channel(k), d.count(), c.data().begin());
    channel_img.push_back(std::move(c));
  }

  for (int panel = 0; panel < panels; ++panel) {
    const Volume& src = panel == 0   ? input
                        : panel == 1 ? label_img
                                     : channel_img[std::size_t(panel - 2)];
    for (int orientation = 0; orientation < 3; ++orientation) {
      int rows = 0, cols = 0;
      auto slice = mid_slice(src, orientation, rows, cols);
      double lo = slice[0], hi = slice[0];
      for (double v : slice) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const double v = slice[std::size_t(r) * cols + c];
          const int px = panel * cell_w + c;
          const int py = orientation * cell_h + r;
          pixels[std::size_t(py) * width + px] =
              (unsigned char)(std::lround((v - lo) * scale));
        }
    }
  }
  write_pgm(path, width, height, pixels);
}

void write_error_bar_csv(const std::string& path, const std::vector<ErrorBarRow>& rows) {
  require(!rows.empty(), "error bar csv needs at least one row");
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open ", path, " for writing");
  out << "level";
  for (std::size_t c = 0; c < rows.front().classes.size(); ++c)
    out << ",class" << c << "_estimate,class" << c << "_ci_low,class" << c
        << "_ci_high";
  out << '\n';
  out.precision(12);
  for (const auto& row : rows) {
    require(row.classes.size() == rows.front().classes.size(),
            "error bar csv rows must share the class count");
    out << row.level;
    for (const auto& c : row.classes)
      out << ',' << c.estimate << ',' << c.ci_low << ',' << c.ci_high;
    out << '\n';
  }
}

}  // namespace mriqc
