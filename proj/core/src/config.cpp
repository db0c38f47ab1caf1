#include "bevlink/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bevlink/errors.hpp"
#include "bevlink/rng.hpp"

namespace bevlink {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
bool parse_number(std::string_view raw, T& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

int to_int(const std::string& key, std::string_view raw) {
  int v = 0;
  if (!parse_number(raw, v)) throw ConfigError(key, "expected an integer, got '" + std::string(raw) + "'");
  return v;
}

double to_double(const std::string& key, std::string_view raw) {
  double v = 0;
  if (!parse_number(raw, v) || !std::isfinite(v))
    throw ConfigError(key, "expected a real number, got '" + std::string(raw) + "'");
  return v;
}

bool to_bool(const std::string& key, std::string_view raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key, "expected a boolean, got '" + s + "'");
}

std::string to_choice(const std::string& key, std::string_view raw, std::initializer_list<const char*> allowed) {
  const std::string s = trim(raw);
  for (const char* a : allowed)
    if (s == a) return s;
  std::string msg = "must be one of {";
  for (const char* a : allowed) msg += std::string(a) + (a == *(allowed.end() - 1) ? "" : ", ");
  throw ConfigError(key, msg + "}, got '" + s + "'");
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>) out += format_double(v[i]);
    else if constexpr (std::is_same_v<T, std::string>) out += v[i];
    else out += std::to_string(v[i]);
  }
  return out;
}

struct KeyDef {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string& name, const std::string& raw)> parse;
  std::function<std::string(const ExperimentConfig&)> format;
};

#define BEV_INT(sec, field)                                                                            \
  KeyDef{#sec, #field, [](ExperimentConfig& c, const std::string& n, const std::string& r) { c.sec.field = to_int(n, r); }, \
         [](const ExperimentConfig& c) { return std::to_string(c.sec.field); }}
#define BEV_REAL(sec, field)                                                                             \
  KeyDef{#sec, #field, [](ExperimentConfig& c, const std::string& n, const std::string& r) { c.sec.field = to_double(n, r); }, \
         [](const ExperimentConfig& c) { return format_double(c.sec.field); }}
#define BEV_BOOL(sec, field)                                                                           \
  KeyDef{#sec, #field, [](ExperimentConfig& c, const std::string& n, const std::string& r) { c.sec.field = to_bool(n, r); }, \
         [](const ExperimentConfig& c) { return std::string(c.sec.field ? "true" : "false"); }}
#define BEV_CHOICE(sec, field, ...)                                                                     \
  KeyDef{#sec, #field,                                                                                  \
         [](ExperimentConfig& c, const std::string& n, const std::string& r) { c.sec.field = to_choice(n, r, {__VA_ARGS__}); }, \
         [](const ExperimentConfig& c) { return c.sec.field; }}
#define BEV_LIST(sec, field, parser)                                                                     \
  KeyDef{#sec, #field,                                                                                   \
         [](ExperimentConfig& c, const std::string& n, const std::string& r) {                           \
           try {                                                                                         \
             c.sec.field = parser(r);                                                                    \
           } catch (const ValidationError& e) {                                                          \
             throw ConfigError(n, e.what());                                                             \
           }                                                                                             \
         },                                                                                              \
         [](const ExperimentConfig& c) { return join(c.sec.field); }}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table{
      BEV_INT(data, grid_size),
      BEV_REAL(data, extent_m),
      BEV_INT(data, image_size),
      BEV_INT(data, num_views),
      BEV_INT(data, frames_per_scene),
      BEV_REAL(data, delta_t_s),
      BEV_CHOICE(encoder, backbone, "small-cnn", "resnet101"),
      BEV_CHOICE(encoder, fusion, "concatenation", "addition", "averaging", "ensemble", "mixture-of-experts"),
      BEV_CHOICE(encoder, overlap, "average", "max"),
      BEV_INT(encoder, image_channels),
      BEV_INT(encoder, radar_channels),
      BEV_CHOICE(channel, kind, "awgn", "digital", "rayleigh"),
      BEV_REAL(channel, ratio),
      BEV_REAL(channel, snr_db),
      BEV_REAL(channel, snr_min_db),
      BEV_REAL(channel, snr_max_db),
      BEV_INT(channel, hidden_channels),
      BEV_INT(channel, compressed_channels),
      BEV_INT(diffusion, steps),
      BEV_REAL(diffusion, beta_min),
      BEV_REAL(diffusion, beta_max),
      BEV_LIST(diffusion, horizons, parse_int_list),
      BEV_INT(diffusion, base_channels),
      BEV_CHOICE(diffusion, placement, "refinement", "denoising"),
      BEV_REAL(train, lr),
      BEV_INT(train, batch_size),
      BEV_INT(train, epochs_stage1),
      BEV_INT(train, epochs_stage2),
      BEV_INT(train, epochs_stage3),
      BEV_BOOL(train, finetune_all),
      BEV_REAL(train, recon_weight),
      BEV_REAL(train, pos_weight),
      BEV_INT(train, val_frames),
      BEV_LIST(eval, snr_list, parse_double_list),
      BEV_REAL(eval, threshold),
      BEV_INT(eval, seeds),
      BEV_LIST(eval, variants, parse_string_list),
      BEV_LIST(eval, horizons, parse_int_list),
  };
  return table;
}

#undef BEV_INT
#undef BEV_REAL
#undef BEV_BOOL
#undef BEV_CHOICE
#undef BEV_LIST

void require(bool ok, const char* key, const std::string& constraint) {
  if (!ok) throw ConfigError(key, constraint);
}

int fused_channels(const ExperimentConfig& c) {
  return c.encoder.fusion == "concatenation" ? c.encoder.image_channels + c.encoder.radar_channels
                                             : c.encoder.image_channels;
}

void check_constraints(const ExperimentConfig& c) {
  require(c.data.grid_size >= 8 && c.data.grid_size % 4 == 0, "data.grid_size", "must be >= 8 and a multiple of 4");
  require(c.data.extent_m > 0.0, "data.extent_m", "must be > 0");
  require(c.data.image_size >= 16 && c.data.image_size % 8 == 0, "data.image_size", "must be >= 16 and a multiple of 8");
  require(c.data.num_views >= 1 && c.data.num_views <= 12, "data.num_views", "must be in [1, 12]");
  require(c.data.frames_per_scene >= 4, "data.frames_per_scene", "must be >= 4");
  require(c.data.delta_t_s > 0.0, "data.delta_t_s", "must be > 0");

  require(c.encoder.image_channels >= 1, "encoder.image_channels", "must be >= 1");
  require(c.encoder.radar_channels >= 1, "encoder.radar_channels", "must be >= 1");
  if (c.encoder.fusion == "addition" || c.encoder.fusion == "averaging")
    require(c.encoder.image_channels == c.encoder.radar_channels, "encoder.radar_channels",
            "must equal encoder.image_channels for " + c.encoder.fusion + " fusion");

  require(c.channel.ratio > 0.0 && c.channel.ratio <= 1.0, "channel.ratio", "must be in (0, 1]");
  const double sym = fused_channels(c) * c.channel.ratio;
  require(std::abs(sym - std::round(sym)) < 1e-9 && std::round(sym) >= 1.0, "channel.ratio",
          "fused channels x ratio must be a positive integer (fused channels = " + std::to_string(fused_channels(c)) + ")");
  require(c.channel.snr_min_db <= c.channel.snr_max_db, "channel.snr_min_db", "must be <= channel.snr_max_db");
  require(c.channel.hidden_channels >= 1, "channel.hidden_channels", "must be >= 1");
  require(c.channel.compressed_channels >= 1 && c.channel.compressed_channels < fused_channels(c),
          "channel.compressed_channels", "must be in [1, fused channels)");

  require(c.diffusion.steps >= 2, "diffusion.steps", "must be >= 2");
  require(c.diffusion.beta_min > 0.0 && c.diffusion.beta_min < c.diffusion.beta_max, "diffusion.beta_min",
          "must satisfy 0 < beta_min < beta_max");
  require(c.diffusion.beta_max * 1000.0 / c.diffusion.steps < 1.0, "diffusion.beta_max",
          "rescaled terminal beta (beta_max * 1000 / steps) must be < 1");
  require(!c.diffusion.horizons.empty(), "diffusion.horizons", "must not be empty");
  for (int h : c.diffusion.horizons) require(h >= 0 && h <= 3, "diffusion.horizons", "values must be in {0,1,2,3}");
  require(c.diffusion.base_channels >= 8 && c.diffusion.base_channels % 8 == 0, "diffusion.base_channels",
          "must be a positive multiple of 8");

  require(c.train.lr > 0.0, "train.lr", "must be > 0");
  require(c.train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(c.train.epochs_stage1 >= 0, "train.epochs_stage1", "must be >= 0");
  require(c.train.epochs_stage2 >= 0, "train.epochs_stage2", "must be >= 0");
  require(c.train.epochs_stage3 >= 0, "train.epochs_stage3", "must be >= 0");
  require(c.train.recon_weight >= 0.0, "train.recon_weight", "must be >= 0");
  require(c.train.pos_weight > 0.0, "train.pos_weight", "must be > 0");
  require(c.train.val_frames >= 1, "train.val_frames", "must be >= 1");

  require(!c.eval.snr_list.empty(), "eval.snr_list", "must not be empty");
  require(c.eval.threshold > 0.0 && c.eval.threshold < 1.0, "eval.threshold", "must be in (0, 1)");
  require(c.eval.seeds >= 1, "eval.seeds", "must be >= 1");
  require(!c.eval.variants.empty(), "eval.variants", "must not be empty");
  for (const auto& v : c.eval.variants)
    require(v == "lossless" || v == "awgn" || v == "awgn+diffusion" || v == "digital", "eval.variants",
            "unknown variant '" + v + "'");
  require(!c.eval.horizons.empty(), "eval.horizons", "must not be empty");
  for (int h : c.eval.horizons) require(h >= 0 && h <= 3, "eval.horizons", "values must be in {0,1,2,3}");
}

}  // namespace

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  std::stringstream ss{std::string(text)};
  for (std::string item; std::getline(ss, item, ',');) {
    double v = 0;
    if (!parse_number(item, v) || !std::isfinite(v)) throw ValidationError("'" + trim(item) + "' is not a real number");
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  std::stringstream ss{std::string(text)};
  for (std::string item; std::getline(ss, item, ',');) {
    int v = 0;
    if (!parse_number(item, v)) throw ValidationError("'" + trim(item) + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> parse_string_list(std::string_view text) {
  std::vector<std::string> out;
  std::stringstream ss{std::string(text)};
  for (std::string item; std::getline(ss, item, ',');) {
    auto t = trim(item);
    if (t.empty()) throw ValidationError("empty list item");
    out.push_back(std::move(t));
  }
  return out;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  std::string current;
  for (const auto& k : key_table()) {
    if (current != k.section) {
      if (!current.empty()) os << "\n";
      current = k.section;
      os << "[" << current << "]\n";
    }
    os << k.key << " = " << k.format(*this) << "\n";
  }
  return os.str();
}

std::string ExperimentConfig::hash() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(to_text());
  return os.str();
}

ExperimentConfig validate_config(std::string_view text) {
  // Strip '#' comment lines; the INI reader only understands ';'.
  std::string cleaned;
  {
    std::stringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
      const auto t = trim(line);
      if (!t.empty() && t[0] == '#') continue;
      cleaned += line + "\n";
    }
  }
  boost::property_tree::ptree tree;
  try {
    std::stringstream in(cleaned);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("<document>", std::string("parse error: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  ExperimentConfig cfg;
  const auto& table = key_table();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(section, "unknown top-level key (keys belong in a [section])");
    const bool known_section = std::any_of(table.begin(), table.end(), [&](const KeyDef& k) { return section == k.section; });
    if (!known_section) throw ConfigError(section, "unknown section");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const KeyDef& k) { return section == k.section && key == k.key; });
      if (it == table.end()) throw ConfigError(name, "unknown key");
      it->parse(cfg, name, value.data());
    }
  }
  check_constraints(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string(), "cannot read config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return validate_config(ss.str());
}

}  // namespace bevlink
