#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spf/backbone.hpp"
#include "spf/nadam.hpp"
#include "spf/spf_flatten.hpp"

namespace spf {

enum class FlattenStrategy { Spf, Baseline };

// Full architecture + training configuration. One seed drives everything;
// independent streams keep init, dropout, data order and bootstrap draws
// from interfering.
struct ModelConfig {
  BackboneConfig backbone;
  SpfConfig spf;
  FlattenStrategy flatten = FlattenStrategy::Spf;
  int num_labels = 16;
  NadamHyper optimizer;
  int batch_size = 16;
  int epochs = 8;
  std::uint64_t seed = 1;
  std::string preset = "desk";
  std::vector<std::string> label_names;  // optional; carried into checkpoints

  void validate() const;
};

ModelConfig desk_preset();
ModelConfig paper_preset();
ModelConfig tiny_preset();
ModelConfig preset_by_name(const std::string& name);

// key=value text: one pair per line, '#' starts a comment, keys namespaced
// (backbone.*, spf.*, model.*, train.*). Used for config files, the
// resolved.cfg echo and the checkpoint config blob.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text);
KvMap load_kv_file(const std::string& path);
std::string kv_to_text(const KvMap& kv);
void save_kv_file(const std::string& path, const KvMap& kv);

KvMap model_config_to_kv(const ModelConfig& cfg);
ModelConfig model_config_from_kv(const KvMap& kv);

// Typed readers with defaults; malformed values raise ConfigError.
int kv_int(const KvMap& kv, const std::string& key, int fallback);
double kv_double(const KvMap& kv, const std::string& key, double fallback);
bool kv_bool(const KvMap& kv, const std::string& key, bool fallback);
std::uint64_t kv_u64(const KvMap& kv, const std::string& key, std::uint64_t fallback);
std::vector<int> kv_int_list(const KvMap& kv, const std::string& key,
                             const std::vector<int>& fallback);

}  // namespace spf
