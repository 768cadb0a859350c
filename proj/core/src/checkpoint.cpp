#include "vpe/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "vpe/errors.hpp"
#include "vpe/kv.hpp"

namespace vpe {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'E', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_record(std::ostream& out, const std::string& name, const TensorF& tensor) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t e : tensor.shape()) write_u64(out, e);
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(tensor.data()),
            static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
}

struct Record {
  std::string name;
  TensorF tensor;
};

Record read_record(std::istream& in, const std::filesystem::path& path) {
  Record rec;
  const std::uint32_t name_len = read_u32(in);
  if (!in || name_len > 4096) throw DataError("checkpoint: corrupt record in " + path.string());
  rec.name.resize(name_len);
  in.read(rec.name.data(), name_len);
  const std::uint32_t rank = read_u32(in);
  if (!in || rank > 8) throw DataError("checkpoint: corrupt record '" + rec.name + "'");
  std::vector<std::size_t> shape(rank);
  std::size_t numel = rank > 0 ? 1 : 0;
  for (auto& e : shape) {
    e = static_cast<std::size_t>(read_u64(in));
    numel *= e;
  }
  std::vector<float> data(numel);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(numel * sizeof(float)));
  if (!in) throw DataError("checkpoint: truncated record '" + rec.name + "'");
  rec.tensor = TensorF(std::move(shape), std::move(data));
  return rec;
}

std::vector<int> parse_int_list(const std::string& text, std::size_t expect) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string piece;
  while (std::getline(in, piece, ',')) out.push_back(std::stoi(piece));
  if (out.size() != expect) {
    throw ConfigError("config: expected " + std::to_string(expect) + " comma-separated values: " +
                      text);
  }
  return out;
}

}  // namespace

VpeConfig VpeConfig::from_kv(const std::map<std::string, std::string>& kv) {
  VpeConfig cfg;
  cfg.input_size = static_cast<int>(kv_int(kv, "input_size", cfg.input_size));
  cfg.in_channels = static_cast<int>(kv_int(kv, "in_channels", cfg.in_channels));
  cfg.out_channels = static_cast<int>(kv_int(kv, "out_channels", cfg.out_channels));
  cfg.latent_dim = static_cast<int>(kv_int(kv, "latent_dim", cfg.latent_dim));
  if (kv.count("enc_channels")) {
    const auto ch = parse_int_list(kv.at("enc_channels"), 3);
    for (int i = 0; i < 3; ++i) cfg.encoder_plan[i].channels = ch[i];
  }
  if (kv.count("enc_kernels")) {
    const auto ks = parse_int_list(kv.at("enc_kernels"), 3);
    for (int i = 0; i < 3; ++i) cfg.encoder_plan[i].kernel = ks[i];
  }
  cfg.mc_samples = static_cast<int>(kv_int(kv, "mc_samples", cfg.mc_samples));
  const std::string mode = kv_string(kv, "target_mode", "prototype");
  if (mode == "prototype") cfg.target_mode = TargetMode::kPrototype;
  else if (mode == "self") cfg.target_mode = TargetMode::kSelf;
  else throw ConfigError("config: target_mode must be 'prototype' or 'self', got " + mode);
  cfg.kl_weight = static_cast<float>(kv_double(kv, "kl_weight", cfg.kl_weight));
  cfg.leaky_slope = static_cast<float>(kv_double(kv, "leaky_slope", cfg.leaky_slope));
  cfg.bn_epsilon = static_cast<float>(kv_double(kv, "bn_epsilon", cfg.bn_epsilon));
  cfg.bn_momentum = static_cast<float>(kv_double(kv, "bn_momentum", cfg.bn_momentum));
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, VpeModelF& model,
                     const AdamState<float>& adam, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());

  std::ostringstream config;
  config << model.config().to_text();
  config << "train_iteration = " << meta.train_iteration << "\n";
  config << "seed = " << meta.seed << "\n";
  config << "adam_lr = " << format_float(adam.lr) << "\n";
  config << "adam_beta1 = " << format_float(adam.beta1) << "\n";
  config << "adam_beta2 = " << format_float(adam.beta2) << "\n";
  config << "adam_epsilon = " << format_float(adam.epsilon) << "\n";
  config << "adam_step_count = " << adam.step_count << "\n";
  if (!meta.rng_sampling_state.empty()) {
    config << "rng_sampling = " << meta.rng_sampling_state << "\n";
    config << "rng_augment = " << meta.rng_augment_state << "\n";
    config << "rng_noise = " << meta.rng_noise_state << "\n";
  }
  const std::string config_text = config.str();

  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u64(out, config_text.size());
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));

  std::vector<std::pair<std::string, const TensorF*>> records;
  for (auto* layer : model.layers()) {
    records.emplace_back(layer->name + ".weight", &layer->weight);
    records.emplace_back(layer->name + ".bias", &layer->bias);
    if (layer->batch_norm) {
      records.emplace_back(layer->name + ".running_mean", &layer->running_mean);
      records.emplace_back(layer->name + ".running_var", &layer->running_var);
    }
  }
  write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, tensor] : records) write_record(out, name, *tensor);

  write_u32(out, static_cast<std::uint32_t>(adam.moments.size() * 2));
  for (const auto& m : adam.moments) {
    write_record(out, "adam.m." + m.name, m.first);
    write_record(out, "adam.v." + m.name, m.second);
  }
  if (!out) throw DataError("checkpoint: write failure for " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("checkpoint: " + path.string() + " lacks the VPEC magic");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint64_t config_len = read_u64(in);
  if (!in || config_len > (1u << 20)) throw DataError("checkpoint: corrupt config block");
  std::string config_text(config_len, '\0');
  in.read(config_text.data(), static_cast<std::streamsize>(config_len));

  const auto kv = parse_kv_text(config_text);
  const VpeConfig config = VpeConfig::from_kv(kv);

  LoadedCheckpoint loaded{config, VpeModelF(config, 0), {}, {}};
  loaded.meta.train_iteration = static_cast<std::uint64_t>(kv_int(kv, "train_iteration", 0));
  loaded.meta.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", 0));
  loaded.meta.rng_sampling_state = kv_string(kv, "rng_sampling", "");
  loaded.meta.rng_augment_state = kv_string(kv, "rng_augment", "");
  loaded.meta.rng_noise_state = kv_string(kv, "rng_noise", "");
  loaded.adam.lr = static_cast<float>(kv_double(kv, "adam_lr", 1e-4));
  loaded.adam.beta1 = static_cast<float>(kv_double(kv, "adam_beta1", 0.9));
  loaded.adam.beta2 = static_cast<float>(kv_double(kv, "adam_beta2", 0.999));
  loaded.adam.epsilon = static_cast<float>(kv_double(kv, "adam_epsilon", 1e-8));
  loaded.adam.step_count = static_cast<std::uint64_t>(kv_int(kv, "adam_step_count", 0));

  std::map<std::string, TensorF*> slots;
  for (auto* layer : loaded.model.layers()) {
    slots[layer->name + ".weight"] = &layer->weight;
    slots[layer->name + ".bias"] = &layer->bias;
    if (layer->batch_norm) {
      slots[layer->name + ".running_mean"] = &layer->running_mean;
      slots[layer->name + ".running_var"] = &layer->running_var;
    }
  }

  const std::uint32_t n_params = read_u32(in);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    Record rec = read_record(in, path);
    const auto it = slots.find(rec.name);
    if (it == slots.end()) {
      throw DataError("checkpoint: unknown parameter '" + rec.name + "'");
    }
    if (!it->second->same_shape(rec.tensor)) {
      throw DataError("checkpoint: parameter '" + rec.name + "' has shape " +
                      rec.tensor.shape_string() + " but the model expects " +
                      it->second->shape_string());
    }
    *it->second = std::move(rec.tensor);
  }

  const std::uint32_t n_adam = read_u32(in);
  std::map<std::string, TensorF> adam_records;
  for (std::uint32_t i = 0; i < n_adam; ++i) {
    Record rec = read_record(in, path);
    adam_records.emplace(std::move(rec.name), std::move(rec.tensor));
  }
  if (!adam_records.empty()) {
    for (const auto& ref : loaded.model.parameters()) {
      const auto m = adam_records.find("adam.m." + ref.name);
      const auto v = adam_records.find("adam.v." + ref.name);
      if (m == adam_records.end() || v == adam_records.end()) {
        throw DataError("checkpoint: optimizer state missing for '" + ref.name + "'");
      }
      loaded.adam.moments.push_back({ref.name, m->second, v->second});
    }
  }
  return loaded;
}

}  // namespace vpe
