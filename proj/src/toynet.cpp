#include "mriqc/toynet.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mriqc/rng.hpp"

namespace mriqc {

namespace fs = std::filesystem;
using json = nlohmann::json;

void NetConfig::validate() const {
  require(in_channels == 1, "NetConfig: in_channels must be 1");
  require(num_classes >= 2, "NetConfig: num_classes must be >= 2, got ", num_classes);
  require(!channel_names.empty(), "NetConfig: at least one uncertainty channel");
  require(!hidden.empty(), "NetConfig: hidden widths must be non-empty");
  for (int w : hidden) require(w > 0, "NetConfig: hidden widths must be positive");
  require(kernel >= 1 && kernel % 2 == 1, "NetConfig: kernel must be odd, got ", kernel);
  require(head_gain > 0.0, "NetConfig: head_gain must be positive");
}

std::int64_t SegModel::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.count();
  return n;
}

std::uint64_t SegModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : params)
    h = fnv1a64(p.data(), std::size_t(p.count()) * sizeof(double), h);
  return h;
}

namespace {

void fill_fan_in_uniform(Tensor& t, std::int64_t fan_in, double scale, Rng& rng) {
  const double limit = std::sqrt(3.0 / double(fan_in));
  for (std::int64_t i = 0; i < t.count(); ++i)
    t[i] = rng.uniform(-limit, limit) * scale;
}

}  // namespace

SegModel init(const NetConfig& cfg) {
  cfg.validate();
  SegModel m;
  m.config = cfg;
  Rng rng(seed_for(cfg.seed, "toynet-init"));

  const int k = cfg.kernel;
  int prev = cfg.in_channels;
  for (std::size_t layer = 0; layer < cfg.hidden.size(); ++layer) {
    const int width = cfg.hidden[layer];
    Tensor w({width, prev, k, k, k});
    Tensor b({width});
    fill_fan_in_uniform(w, std::int64_t(prev) * k * k * k, 1.0, rng);
    fill_fan_in_uniform(b, std::int64_t(prev) * k * k * k, 1.0, rng);
    m.param_names.push_back("conv" + std::to_string(layer + 1) + ".w");
    m.params.push_back(std::move(w));
    m.param_names.push_back("conv" + std::to_string(layer + 1) + ".b");
    m.params.push_back(std::move(b));
    prev = width;
  }
  // 1x1x1 heads, scaled down by the head gain
  const double inv_gain = 1.0 / cfg.head_gain;
  Tensor wl({cfg.num_classes, prev, 1, 1, 1});
  Tensor bl({cfg.num_classes});
  fill_fan_in_uniform(wl, prev, inv_gain, rng);
  fill_fan_in_uniform(bl, prev, inv_gain, rng);
  m.param_names.push_back("head_logits.w");
  m.params.push_back(std::move(wl));
  m.param_names.push_back("head_logits.b");
  m.params.push_back(std::move(bl));

  Tensor ws({cfg.uncertainty_channels(), prev, 1, 1, 1});
  Tensor bs({cfg.uncertainty_channels()});
  fill_fan_in_uniform(ws, prev, inv_gain, rng);
  fill_fan_in_uniform(bs, prev, inv_gain, rng);
  m.param_names.push_back("head_s.w");
  m.params.push_back(std::move(ws));
  m.param_names.push_back("head_s.b");
  m.params.push_back(std::move(bs));
  return m;
}

namespace {

void check_patch(const NetConfig& cfg, const Tensor& patch) {
  require(patch.rank() == 4 && patch.dim(0) == cfg.in_channels,
          "toynet: patch must be [", cfg.in_channels, ",Z,Y,X], shape is ",
          patch.shape_str());
  for (int i = 1; i < 4; ++i)
    require(patch.dim(i) >= cfg.kernel, "toynet: patch dim ", patch.dim(i),
            " smaller than kernel ", cfg.kernel);
}

}  // namespace

NetOutputs forward(Tape& tape, const SegModel& m, Var patch) {
  m.config.validate();
  check_patch(m.config, tape.value(patch));
  require(m.params.size() == 2 * m.config.hidden.size() + 4,
          "toynet: parameter list does not match config");

  std::vector<Var> ps;
  ps.reserve(m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i)
    ps.push_back(tape.param(m.params[i], m.param_names[i], !m.frozen));

  Var h = patch;
  for (std::size_t layer = 0; layer < m.config.hidden.size(); ++layer)
    h = relu(conv3d(h, ps[2 * layer], ps[2 * layer + 1]));
  const std::size_t off = 2 * m.config.hidden.size();
  Var logits = mul_scalar(conv3d(h, ps[off], ps[off + 1]), m.config.head_gain);
  Var s_maps = mul_scalar(conv3d(h, ps[off + 2], ps[off + 3]), m.config.head_gain);
  return {logits, s_maps};
}

NetOutputTensors forward_infer(const SegModel& m, const Tensor& patch) {
  m.config.validate();
  check_patch(m.config, patch);
  Tensor h = patch, next, activated;
  for (std::size_t layer = 0; layer < m.config.hidden.size(); ++layer) {
    conv3d_forward(h, m.params[2 * layer], &m.params[2 * layer + 1], next);
    relu_forward(next, activated);
    h = activated;
  }
  const std::size_t off = 2 * m.config.hidden.size();
  NetOutputTensors out;
  conv3d_forward(h, m.params[off], &m.params[off + 1], out.logits);
  conv3d_forward(h, m.params[off + 2], &m.params[off + 3], out.s_maps);
  for (std::int64_t i = 0; i < out.logits.count(); ++i)
    out.logits[i] *= m.config.head_gain;
  for (std::int64_t i = 0; i < out.s_maps.count(); ++i)
    out.s_maps[i] *= m.config.head_gain;
  return out;
}

SegModel freeze(const SegModel& m) {
  SegModel out = m;
  out.frozen = true;
  return out;
}

// ---- checkpoint i/o ---------------------------------------------------------

namespace {

std::string blob_name(const std::string& param_name) {
  std::string s = param_name;
  for (char& c : s)
    if (c == '.') c = '_';
  return s + ".bin";
}

void write_le_doubles(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open ", path.string(), " for writing");
  std::vector<unsigned char> bytes(std::size_t(t.count()) * 8);
  for (std::int64_t i = 0; i < t.count(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &t.data()[i], 8);
    for (int b = 0; b < 8; ++b)
      bytes[std::size_t(i) * 8 + b] = (unsigned char)(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  require(out.good(), "short write to ", path.string());
}

Tensor read_le_doubles(const fs::path& path, const std::vector<std::int64_t>& shape,
                       std::uint64_t expect_checksum) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint blob ", path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::uint64_t got = fnv1a64(bytes.data(), bytes.size());
  require(got == expect_checksum, "checksum mismatch in checkpoint blob ",
          path.string(), "; refusing to load");
  Tensor t(shape);
  require(std::int64_t(bytes.size()) == t.count() * 8, "checkpoint blob ",
          path.string(), " has wrong size");
  for (std::int64_t i = 0; i < t.count(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= std::uint64_t(bytes[std::size_t(i) * 8 + b]) << (8 * b);
    std::memcpy(&t.data()[i], &bits, 8);
  }
  return t;
}

json config_to_json(const NetConfig& cfg) {
  return json{{"in_channels", cfg.in_channels},
              {"num_classes", cfg.num_classes},
              {"channel_names", cfg.channel_names},
              {"hidden", cfg.hidden},
              {"kernel", cfg.kernel},
              {"head_gain", cfg.head_gain},
              {"seed", cfg.seed}};
}

NetConfig config_from_json(const json& j) {
  NetConfig cfg;
  cfg.in_channels = j.at("in_channels");
  cfg.num_classes = j.at("num_classes");
  cfg.channel_names = j.at("channel_names").get<std::vector<std::string>>();
  cfg.hidden = j.at("hidden").get<std::vector<int>>();
  cfg.kernel = j.at("kernel");
  cfg.head_gain = j.at("head_gain");
  cfg.seed = j.at("seed");
  return cfg;
}

}  // namespace

void save_checkpoint(const SegModel& m, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "mriqc-checkpoint/1";
  manifest["config"] = config_to_json(m.config);
  manifest["provenance"] = m.provenance;
  manifest["frozen"] = m.frozen;
  json tensors = json::array();
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const fs::path blob = fs::path(dir) / blob_name(m.param_names[i]);
    write_le_doubles(blob, m.params[i]);
    std::ifstream in(blob, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    tensors.push_back({{"name", m.param_names[i]},
                       {"shape", m.params[i].shape()},
                       {"file", blob_name(m.param_names[i])},
                       {"fnv1a64", fnv1a64(bytes.data(), bytes.size())}});
  }
  manifest["tensors"] = tensors;
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
  require(out.good(), "cannot write checkpoint manifest in ", dir);
  out << manifest.dump(2) << "\n";
}

SegModel load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  require(in.good(), "no checkpoint manifest in ", dir);
  json manifest = json::parse(in);
  require(manifest.at("format") == "mriqc-checkpoint/1",
          "unsupported checkpoint format in ", dir);

  SegModel m;
  m.config = config_from_json(manifest.at("config"));
  m.provenance = manifest.at("provenance");
  m.frozen = manifest.at("frozen");
  for (const auto& entry : manifest.at("tensors")) {
    m.param_names.push_back(entry.at("name"));
    m.params.push_back(read_le_doubles(fs::path(dir) / std::string(entry.at("file")),
                                       entry.at("shape").get<std::vector<std::int64_t>>(),
                                       entry.at("fnv1a64")));
  }
  require(m.params.size() == 2 * m.config.hidden.size() + 4,
          "checkpoint in ", dir, " has an unexpected tensor list");
  return m;
}

}  // namespace mriqc
