#include "pcdiff/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <stdexcept>

#include "pcdiff/errors.hpp"

namespace pcdiff {

namespace {

using ordered_json = nlohmann::ordered_json;

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string kind_name(ModelKind k) { return k == ModelKind::diffusion ? "diffusion" : "classifier"; }

ordered_json header_json(const CheckpointHeader& h) {
  ordered_json j;
  j["kind"] = kind_name(h.kind);
  j["layer_sizes"] = h.layer_sizes;
  j["schedule"] = {{"T", h.T}, {"beta_start", h.beta_start}, {"beta_end", h.beta_end}};
  j["time_conditioned"] = h.time_conditioned;
  j["data_dim"] = h.data_dim;
  j["seed"] = h.seed;
  j["param_count"] = h.param_count;
  return j;
}

CheckpointHeader parse_header(const std::string& text) {
  CheckpointHeader h;
  try {
    const auto j = ordered_json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "diffusion") {
      h.kind = ModelKind::diffusion;
    } else if (kind == "classifier") {
      h.kind = ModelKind::classifier;
    } else {
      throw FormatError("checkpoint header: unknown model kind '" + kind + "'");
    }
    h.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    h.T = j.at("schedule").at("T").get<int>();
    h.beta_start = j.at("schedule").at("beta_start").get<double>();
    h.beta_end = j.at("schedule").at("beta_end").get<double>();
    h.time_conditioned = j.at("time_conditioned").get<bool>();
    h.data_dim = j.at("data_dim").get<std::size_t>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.param_count = j.at("param_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  return h;
}

std::size_t count_params(const std::vector<std::size_t>& sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  if (ckpt.params.size() != ckpt.header.param_count) {
    throw std::invalid_argument("checkpoint: parameter count disagrees with header");
  }
  const std::string header = header_json(ckpt.header).dump();
  os.write(kCheckpointMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double v : ckpt.params) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> b{};
    for (std::size_t k = 0; k < 8; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
    os.write(b.data(), 8);
  }
}

Checkpoint read_checkpoint(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || !std::equal(magic.begin(), magic.end(), kCheckpointMagic)) {
    throw FormatError("bad magic: not a PCDF checkpoint");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t header_len = get_u32(is);
  std::string header(header_len, '\0');
  if (!is.read(header.data(), header_len)) throw FormatError("checkpoint truncated in header");

  Checkpoint ckpt;
  ckpt.header = parse_header(header);
  if (count_params(ckpt.header.layer_sizes) != ckpt.header.param_count) {
    throw FormatError("checkpoint header: param_count disagrees with layer_sizes");
  }
  ckpt.params.resize(ckpt.header.param_count);
  for (double& v : ckpt.params) {
    std::array<unsigned char, 8> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw FormatError("checkpoint payload truncated");
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    v = std::bit_cast<double>(bits);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint has trailing bytes");
  return ckpt;
}

Checkpoint to_checkpoint(const DiffusionModel& model, std::uint64_t seed) {
  Checkpoint c;
  c.header.kind = ModelKind::diffusion;
  c.header.layer_sizes = model.net.layer_sizes();
  c.header.T = model.schedule.T();
  c.header.beta_start = model.schedule.beta_start();
  c.header.beta_end = model.schedule.beta_end();
  c.header.time_conditioned = true;
  c.header.data_dim = model.data_dim;
  c.header.seed = seed;
  c.header.param_count = model.net.parameter_count();
  c.params.assign(model.net.parameters().begin(), model.net.parameters().end());
  return c;
}

Checkpoint to_checkpoint(const PreferenceClassifier& clf, const NoiseSchedule& schedule, std::uint64_t seed) {
  Checkpoint c;
  c.header.kind = ModelKind::classifier;
  c.header.layer_sizes = clf.trunk.layer_sizes();
  c.header.T = schedule.T();
  c.header.beta_start = schedule.beta_start();
  c.header.beta_end = schedule.beta_end();
  c.header.time_conditioned = clf.time_conditioned;
  c.header.data_dim = clf.data_dim;
  c.header.seed = seed;
  c.header.param_count = clf.trunk.parameter_count();
  c.params.assign(clf.trunk.parameters().begin(), clf.trunk.parameters().end());
  return c;
}

namespace {

Mlp mlp_from(const Checkpoint& ckpt) {
  try {
    Mlp net(ckpt.header.layer_sizes);
    std::copy(ckpt.params.begin(), ckpt.params.end(), net.parameters().begin());
    return net;
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace

DiffusionModel diffusion_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.header.kind != ModelKind::diffusion) throw FormatError("checkpoint holds a classifier, not a diffusion model");
  try {
    return DiffusionModel(mlp_from(ckpt), make_schedule(ckpt.header.T, ckpt.header.beta_start, ckpt.header.beta_end),
                          ckpt.header.data_dim);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

PreferenceClassifier classifier_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.header.kind != ModelKind::classifier) throw FormatError("checkpoint holds a diffusion model, not a classifier");
  try {
    return PreferenceClassifier(mlp_from(ckpt), ckpt.header.data_dim, ckpt.header.time_conditioned, ckpt.header.T);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
  if (!os.flush()) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace pcdiff
