#include "spf/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace spf {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw CheckpointError(CheckpointDefect::Truncated,
                            "checkpoint: truncated at byte " + std::to_string(pos));
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(static_cast<unsigned char>(buf[pos]) |
                                              (static_cast<unsigned char>(buf[pos + 1]) << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_tensor_table(std::string& out, const ParamSet<float>& ps) {
  put_u32(out, static_cast<std::uint32_t>(ps.count()));
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const std::string& name = ps.names[i];
    const TensorF& t = ps.tensors[i];
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.rank()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) put_f32(out, v);
  }
}

ParamSet<float> read_tensor_table(Reader& r) {
  ParamSet<float> ps;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    const std::string name = r.bytes(name_len);
    const std::uint8_t rank = r.u8();
    std::vector<int> shape;
    std::int64_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      shape.push_back(static_cast<int>(r.u32()));
      numel *= shape.back();
    }
    if (numel < 0 || numel > (1ll << 31))
      throw CheckpointError(CheckpointDefect::Truncated,
                            "checkpoint: implausible tensor size for " + name);
    TensorF t(shape);
    for (std::int64_t j = 0; j < numel; ++j) t[j] = r.f32();
    ps.add(name, std::move(t));
  }
  return ps;
}

KvMap meta_to_kv(const CheckpointMeta& meta) {
  KvMap kv;
  char buf[40];
  kv["meta.epochs_completed"] = std::to_string(meta.epochs_completed);
  kv["meta.best_epoch"] = std::to_string(meta.best_epoch);
  std::snprintf(buf, sizeof(buf), "%.17g", meta.final_bce);
  kv["meta.final_bce"] = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", meta.final_recon);
  kv["meta.final_recon"] = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", meta.final_total);
  kv["meta.final_total"] = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", meta.best_val_macro_auc);
  kv["meta.best_val_macro_auc"] = buf;
  return kv;
}

CheckpointMeta meta_from_kv(const KvMap& kv) {
  CheckpointMeta meta;
  meta.epochs_completed = kv_int(kv, "meta.epochs_completed", 0);
  meta.best_epoch = kv_int(kv, "meta.best_epoch", -1);
  meta.final_bce = kv_double(kv, "meta.final_bce", 0.0);
  meta.final_recon = kv_double(kv, "meta.final_recon", 0.0);
  meta.final_total = kv_double(kv, "meta.final_total", 0.0);
  meta.best_val_macro_auc = kv_double(kv, "meta.best_val_macro_auc", 0.0);
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);

  KvMap kv = model_config_to_kv(ckpt.cfg);
  for (const auto& [k, v] : meta_to_kv(ckpt.meta)) kv[k] = v;
  const std::string blob = kv_to_text(kv);
  put_u32(out, static_cast<std::uint32_t>(blob.size()));
  out += blob;

  put_tensor_table(out, ckpt.params);

  out.push_back(ckpt.opt ? 1 : 0);
  if (ckpt.opt) {
    put_u64(out, static_cast<std::uint64_t>(ckpt.opt->t));
    ParamSet<float> moments;
    for (std::size_t i = 0; i < ckpt.params.count(); ++i) {
      moments.add(ckpt.params.names[i] + ".m", ckpt.opt->m[i]);
      moments.add(ckpt.params.names[i] + ".v", ckpt.opt->v[i]);
    }
    put_tensor_table(out, moments);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot read " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};

  const std::string magic = r.bytes(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(CheckpointDefect::BadMagic, "checkpoint: bad magic in " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError(CheckpointDefect::VersionMismatch,
                          "checkpoint: version " + std::to_string(version) + ", expected " +
                              std::to_string(kVersion));

  const std::uint32_t blob_len = r.u32();
  const std::string blob = r.bytes(blob_len);
  Checkpoint ckpt;
  try {
    const KvMap kv = parse_kv_text(blob);
    ckpt.cfg = model_config_from_kv(kv);
    ckpt.meta = meta_from_kv(kv);
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointDefect::BadConfigBlob,
                          std::string("checkpoint: config blob: ") + e.what());
  }

  ckpt.params = read_tensor_table(r);

  const std::uint8_t opt_flag = r.u8();
  if (opt_flag == 1) {
    NadamState<float> st;
    st.hyper = ckpt.cfg.optimizer;
    st.t = static_cast<std::int64_t>(r.u64());
    ParamSet<float> moments = read_tensor_table(r);
    for (std::size_t i = 0; i < ckpt.params.count(); ++i) {
      const int mi = moments.index_of(ckpt.params.names[i] + ".m");
      const int vi = moments.index_of(ckpt.params.names[i] + ".v");
      if (mi < 0 || vi < 0)
        throw CheckpointError(CheckpointDefect::Truncated,
                              "checkpoint: missing optimizer moments for " + ckpt.params.names[i]);
      st.m.push_back(moments.tensors[static_cast<std::size_t>(mi)]);
      st.v.push_back(moments.tensors[static_cast<std::size_t>(vi)]);
    }
    ckpt.opt = std::move(st);
  }
  return ckpt;
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
  Model<float> model = build_model<float>(ckpt.cfg);
  if (model.params.count() != ckpt.params.count())
    throw Error("checkpoint: stored tensor count " + std::to_string(ckpt.params.count()) +
                " does not match the rebuilt model's " + std::to_string(model.params.count()));
  for (std::size_t i = 0; i < model.params.count(); ++i) {
    const int idx = ckpt.params.index_of(model.params.names[i]);
    if (idx < 0) throw Error("checkpoint: missing tensor " + model.params.names[i]);
    const TensorF& stored = ckpt.params.tensors[static_cast<std::size_t>(idx)];
    if (stored.shape != model.params.tensors[i].shape)
      throw Error("checkpoint: tensor " + model.params.names[i] + " has shape " + stored.shape_str() +
                  ", expected " + model.params.tensors[i].shape_str());
    model.params.tensors[i] = stored;
  }
  return model;
}

}  // namespace spf
