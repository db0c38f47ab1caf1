#include "bevlink/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "bevlink/errors.hpp"
#include "json.hpp"

namespace bevlink {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'B', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::string dtype_name(const torch::Tensor& t) {
  if (t.scalar_type() == torch::kFloat32) return "f32";
  if (t.scalar_type() == torch::kInt64) return "i64";
  throw ValidationError("unsupported checkpoint tensor dtype");
}

torch::ScalarType dtype_from(const std::string& name) {
  if (name == "f32") return torch::kFloat32;
  if (name == "i64") return torch::kInt64;
  throw IngestionError("unknown tensor dtype '" + name + "' in checkpoint");
}

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw IngestionError("truncated checkpoint header");
  return value;
}

json metrics_to_json(const StageMetrics& m) {
  json snr = json::array();
  for (const auto& [s, v] : m.snr_val_iou) snr.push_back({s, v});
  return {{"stage", m.stage},
          {"epoch_loss", m.epoch_loss},
          {"epoch_val_iou", m.epoch_val_iou},
          {"lossless_val_iou", m.lossless_val_iou},
          {"snr_val_iou", snr}};
}

StageMetrics metrics_from_json(const json& j) {
  StageMetrics m;
  m.stage = j.at("stage").get<int>();
  m.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  m.epoch_val_iou = j.at("epoch_val_iou").get<std::vector<double>>();
  m.lossless_val_iou = j.at("lossless_val_iou").get<double>();
  for (const auto& p : j.at("snr_val_iou")) m.snr_val_iou.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return m;
}

}  // namespace

std::string Checkpoint::id() const {
  return "stage" + std::to_string(stage) + "-" + config.hash() + "-" + std::to_string(seed);
}

std::vector<NamedTensor> Checkpoint::named_tensors() const {
  std::vector<NamedTensor> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back({t.name, t.tensor});
  return out;
}

const StageMetrics& Checkpoint::stage_metrics(int s) const {
  for (const auto& m : metrics)
    if (m.stage == s) return m;
  throw PrerequisiteError("checkpoint has no metrics for stage " + std::to_string(s));
}

std::vector<std::string> modules_for_stage(int stage) {
  if (stage < 1 || stage > 3) throw ValidationError("stage must be 1, 2 or 3");
  std::vector<std::string> out{"encoder", "compressor", "seg_decoder"};
  if (stage >= 2) {
    out.push_back("channel_encoder");
    out.push_back("channel_decoder");
  }
  if (stage >= 3) out.push_back("denoiser");
  return out;
}

Checkpoint capture_checkpoint(const Networks& nets, int stage, std::uint64_t seed, std::vector<StageMetrics> metrics) {
  const auto wanted = modules_for_stage(stage);
  Checkpoint ckpt;
  ckpt.stage = stage;
  ckpt.config = nets.config();
  ckpt.seed = seed;
  ckpt.metrics = std::move(metrics);
  for (const auto& entry : nets.state()) {
    const auto prefix = entry.name.substr(0, entry.name.find('.'));
    if (std::find(wanted.begin(), wanted.end(), prefix) == wanted.end()) continue;
    ckpt.tensors.push_back({entry.name, side_of(entry.name), entry.tensor.detach().clone().contiguous()});
  }
  return ckpt;
}

Networks restore_networks(const Checkpoint& ckpt) {
  Networks nets(ckpt.config, ckpt.seed);
  nets.load_state(ckpt.named_tensors());
  nets.set_training(false);
  return nets;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
  json header;
  header["stage"] = ckpt.stage;
  header["config"] = ckpt.config.to_text();
  header["config_hash"] = ckpt.config.hash();
  header["seed"] = std::to_string(ckpt.seed);
  header["metrics"] = json::array();
  for (const auto& m : ckpt.metrics) header["metrics"].push_back(metrics_to_json(m));
  header["tensors"] = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    const auto bytes = static_cast<std::uint64_t>(t.tensor.numel() * t.tensor.element_size());
    header["tensors"].push_back({{"name", t.name},
                                 {"side", to_string(t.side)},
                                 {"dtype", dtype_name(t.tensor)},
                                 {"shape", t.tensor.sizes().vec()},
                                 {"offset", offset},
                                 {"bytes", bytes}});
    offset += bytes;
  }
  const std::string text = header.dump();
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write checkpoint " + file.string());
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint64_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) {
    auto c = t.tensor.contiguous();
    os.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(c.numel() * c.element_size()));
  }
  if (!os) throw Error("failed writing checkpoint " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IngestionError("cannot open checkpoint " + file.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw IngestionError("not a bevlink checkpoint: " + file.string());
  if (read_pod<std::uint32_t>(is) != kVersion) throw IngestionError("unsupported checkpoint version");
  const auto header_len = read_pod<std::uint64_t>(is);
  if (header_len > (1ULL << 30)) throw IngestionError("implausible checkpoint header length");
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len))) throw IngestionError("truncated checkpoint header");
  const auto data_start = is.tellg();

  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    ckpt.stage = header.at("stage").get<int>();
    if (ckpt.stage < 1 || ckpt.stage > 3) throw IngestionError("checkpoint stage out of range");
    ckpt.config = validate_config(header.at("config").get<std::string>());
    ckpt.seed = std::stoull(header.at("seed").get<std::string>());
    for (const auto& m : header.at("metrics")) ckpt.metrics.push_back(metrics_from_json(m));
    for (const auto& t : header.at("tensors")) {
      const auto shape = t.at("shape").get<std::vector<std::int64_t>>();
      auto tensor = torch::empty(shape, torch::TensorOptions().dtype(dtype_from(t.at("dtype").get<std::string>())));
      const auto bytes = t.at("bytes").get<std::uint64_t>();
      if (bytes != static_cast<std::uint64_t>(tensor.numel() * tensor.element_size()))
        throw IngestionError("tensor '" + t.at("name").get<std::string>() + "' has an inconsistent size");
      is.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
      if (!is.read(static_cast<char*>(tensor.data_ptr()), static_cast<std::streamsize>(bytes)))
        throw IngestionError("truncated tensor data in checkpoint");
      ckpt.tensors.push_back({t.at("name").get<std::string>(), parse_side(t.at("side").get<std::string>()), tensor});
    }
  } catch (const json::exception& e) {
    throw IngestionError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw IngestionError(std::string("checkpoint config does not validate: ") + e.what());
  }
  return ckpt;
}

}  // namespace bevlink
