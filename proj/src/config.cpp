#include "spf/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spf/error.hpp"

namespace spf {

void ModelConfig::validate() const {
  backbone.validate();
  spf.validate();
  if (num_labels < 1) throw ConfigError("model: num_labels must be >= 1");
  if (batch_size < 1) throw ConfigError("model: batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("model: epochs must be >= 0");
  if (!label_names.empty() && static_cast<int>(label_names.size()) != num_labels)
    throw ConfigError("model: " + std::to_string(label_names.size()) + " label names for " +
                      std::to_string(num_labels) + " labels");
  if (flatten == FlattenStrategy::Baseline) {
    const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(spf.code_dim))));
    const auto out = backbone.output_shape();
    if (g * g != spf.code_dim)
      throw ConfigError("model: baseline flatten needs a square code_dim, got " +
                        std::to_string(spf.code_dim));
    if (out[1] % g != 0 || out[2] % g != 0)
      throw ConfigError("model: baseline grid " + std::to_string(g) + " does not divide feature maps " +
                        std::to_string(out[1]) + "x" + std::to_string(out[2]));
  }
}

ModelConfig desk_preset() {
  ModelConfig cfg;  // struct defaults are the desk scale
  cfg.preset = "desk";
  cfg.optimizer.lr = 1e-3;
  cfg.batch_size = 16;
  cfg.epochs = 8;
  return cfg;
}

ModelConfig paper_preset() {
  ModelConfig cfg;
  cfg.preset = "paper";
  cfg.backbone.input_h = cfg.backbone.input_w = 512;
  cfg.backbone.stage_channels = {16, 32, 64, 128};
  cfg.backbone.dilation_rates = {1, 2, 4, 2};
  cfg.backbone.block_depth = 2;
  cfg.backbone.dropout_p = 0.1;
  cfg.backbone.pyramid_levels = 3;
  cfg.spf.code_dim = 128;
  cfg.num_labels = 57;
  cfg.optimizer.lr = 2e-6;
  cfg.batch_size = 12;
  cfg.epochs = 30;
  return cfg;
}

ModelConfig tiny_preset() {
  ModelConfig cfg;
  cfg.preset = "tiny";
  cfg.backbone.input_h = cfg.backbone.input_w = 16;
  cfg.backbone.stage_channels = {4, 4};
  cfg.backbone.dilation_rates = {1, 2};
  cfg.backbone.block_depth = 1;
  cfg.backbone.dropout_p = 0.0;
  cfg.backbone.pyramid_levels = 2;
  cfg.spf.code_dim = 4;
  cfg.num_labels = 3;
  cfg.optimizer.lr = 1e-2;
  cfg.batch_size = 8;
  cfg.epochs = 10;
  return cfg;
}

ModelConfig preset_by_name(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  if (name == "tiny") return tiny_preset();
  throw ConfigError("unknown preset '" + name + "' (expected desk, paper or tiny)");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string join_names(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "|" : "") + v[i];
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) parts.push_back(cur);
  return parts;
}

}  // namespace

KvMap parse_kv_text(const std::string& text) {
  KvMap kv;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " has no '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KvMap load_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv_text(ss.str());
}

std::string kv_to_text(const KvMap& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void save_kv_file(const std::string& path, const KvMap& kv) {
  std::ofstream out(path);
  if (!out) throw IoError("config: cannot write " + path);
  out << kv_to_text(kv);
}

int kv_int(const KvMap& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " = '" + it->second + "' is not an integer");
  }
}

double kv_double(const KvMap& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " = '" + it->second + "' is not a number");
  }
}

bool kv_bool(const KvMap& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config: " + key + " = '" + it->second + "' is not a boolean");
}

std::uint64_t kv_u64(const KvMap& kv, const std::string& key, std::uint64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " = '" + it->second + "' is not an unsigned integer");
  }
}

std::vector<int> kv_int_list(const KvMap& kv, const std::string& key,
                             const std::vector<int>& fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::vector<int> out;
  for (const auto& part : split_on(it->second, ',')) {
    try {
      out.push_back(std::stoi(trim(part)));
    } catch (const std::exception&) {
      throw ConfigError("config: " + key + " = '" + it->second + "' is not an integer list");
    }
  }
  if (out.empty()) throw ConfigError("config: " + key + " is empty");
  return out;
}

KvMap model_config_to_kv(const ModelConfig& cfg) {
  KvMap kv;
  kv["backbone.input_h"] = std::to_string(cfg.backbone.input_h);
  kv["backbone.input_w"] = std::to_string(cfg.backbone.input_w);
  kv["backbone.stage_channels"] = join_ints(cfg.backbone.stage_channels);
  kv["backbone.dilations"] = join_ints(cfg.backbone.dilation_rates);
  kv["backbone.block_depth"] = std::to_string(cfg.backbone.block_depth);
  kv["backbone.dropout"] = fmt_double(cfg.backbone.dropout_p);
  kv["backbone.pyramid_levels"] = std::to_string(cfg.backbone.pyramid_levels);
  kv["backbone.skips"] = cfg.backbone.skip_connections ? "true" : "false";
  kv["spf.code_dim"] = std::to_string(cfg.spf.code_dim);
  kv["spf.shared_weights"] = cfg.spf.shared_weights ? "true" : "false";
  kv["spf.recon_weight"] = fmt_double(cfg.spf.recon_weight);
  kv["spf.encoder_depth"] = std::to_string(cfg.spf.encoder_depth);
  kv["model.flatten"] = cfg.flatten == FlattenStrategy::Spf ? "spf" : "baseline";
  kv["model.labels"] = std::to_string(cfg.num_labels);
  kv["model.preset"] = cfg.preset;
  if (!cfg.label_names.empty()) kv["model.label_names"] = join_names(cfg.label_names);
  kv["train.lr"] = fmt_double(cfg.optimizer.lr);
  kv["train.beta1"] = fmt_double(cfg.optimizer.beta1);
  kv["train.beta2"] = fmt_double(cfg.optimizer.beta2);
  kv["train.eps"] = fmt_double(cfg.optimizer.eps);
  kv["train.batch_size"] = std::to_string(cfg.batch_size);
  kv["train.epochs"] = std::to_string(cfg.epochs);
  kv["train.seed"] = std::to_string(cfg.seed);
  return kv;
}

ModelConfig model_config_from_kv(const KvMap& kv) {
  ModelConfig base;
  auto preset = kv.find("model.preset");
  if (preset != kv.end()) base = preset_by_name(preset->second);

  ModelConfig cfg = base;
  cfg.backbone.input_h = kv_int(kv, "backbone.input_h", base.backbone.input_h);
  cfg.backbone.input_w = kv_int(kv, "backbone.input_w", base.backbone.input_w);
  cfg.backbone.stage_channels = kv_int_list(kv, "backbone.stage_channels", base.backbone.stage_channels);
  cfg.backbone.dilation_rates = kv_int_list(kv, "backbone.dilations", base.backbone.dilation_rates);
  cfg.backbone.block_depth = kv_int(kv, "backbone.block_depth", base.backbone.block_depth);
  cfg.backbone.dropout_p = kv_double(kv, "backbone.dropout", base.backbone.dropout_p);
  cfg.backbone.pyramid_levels = kv_int(kv, "backbone.pyramid_levels", base.backbone.pyramid_levels);
  cfg.backbone.skip_connections = kv_bool(kv, "backbone.skips", base.backbone.skip_connections);
  cfg.spf.code_dim = kv_int(kv, "spf.code_dim", base.spf.code_dim);
  cfg.spf.shared_weights = kv_bool(kv, "spf.shared_weights", base.spf.shared_weights);
  cfg.spf.recon_weight = kv_double(kv, "spf.recon_weight", base.spf.recon_weight);
  cfg.spf.encoder_depth = kv_int(kv, "spf.encoder_depth", base.spf.encoder_depth);
  auto flat = kv.find("model.flatten");
  if (flat != kv.end()) {
    if (flat->second == "spf")
      cfg.flatten = FlattenStrategy::Spf;
    else if (flat->second == "baseline")
      cfg.flatten = FlattenStrategy::Baseline;
    else
      throw ConfigError("config: model.flatten must be spf or baseline, got '" + flat->second + "'");
  }
  cfg.num_labels = kv_int(kv, "model.labels", base.num_labels);
  auto names = kv.find("model.label_names");
  if (names != kv.end()) cfg.label_names = split_on(names->second, '|');
  cfg.optimizer.lr = kv_double(kv, "train.lr", base.optimizer.lr);
  cfg.optimizer.beta1 = kv_double(kv, "train.beta1", base.optimizer.beta1);
  cfg.optimizer.beta2 = kv_double(kv, "train.beta2", base.optimizer.beta2);
  cfg.optimizer.eps = kv_double(kv, "train.eps", base.optimizer.eps);
  cfg.batch_size = kv_int(kv, "train.batch_size", base.batch_size);
  cfg.epochs = kv_int(kv, "train.epochs", base.epochs);
  cfg.seed = kv_u64(kv, "train.seed", base.seed);
  return cfg;
}

}  // namespace spf
