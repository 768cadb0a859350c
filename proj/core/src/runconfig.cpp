#include "vpe/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "vpe/errors.hpp"
#include "vpe/kv.hpp"

namespace vpe {

namespace {

struct KeyBinding {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not an integer: " + v);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not an integer: " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw ConfigError("config: key '" + key + "' is not a number: " + v);
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' is not a boolean: " + v);
}

std::array<int, 3> to_int3(const std::string& key, const std::string& v) {
  std::array<int, 3> out{};
  std::istringstream in(v);
  std::string piece;
  int i = 0;
  while (std::getline(in, piece, ',')) {
    if (i >= 3) throw ConfigError("config: key '" + key + "' needs exactly 3 values: " + v);
    out[i++] = to_int(key, piece);
  }
  if (i != 3) throw ConfigError("config: key '" + key + "' needs exactly 3 values: " + v);
  return out;
}

std::string int3_text(const std::array<int, 3>& v) {
  std::ostringstream os;
  os << v[0] << ',' << v[1] << ',' << v[2];
  return os.str();
}

#define VPE_INT_KEY(field)                                                       \
  {#field, [](RunConfig& c, const std::string& v) { c.field = to_int(#field, v); }, \
   [](const RunConfig& c) { return std::to_string(c.field); }}
#define VPE_DOUBLE_KEY(field)                                                       \
  {#field, [](RunConfig& c, const std::string& v) { c.field = to_double(#field, v); }, \
   [](const RunConfig& c) { return format_double(c.field); }}
#define VPE_BOOL_KEY(field)                                                       \
  {#field, [](RunConfig& c, const std::string& v) { c.field = to_bool(#field, v); }, \
   [](const RunConfig& c) { return c.field ? std::string("true") : std::string("false"); }}
#define VPE_STRING_KEY(field)                                              \
  {#field, [](RunConfig& c, const std::string& v) { c.field = v; },        \
   [](const RunConfig& c) { return c.field; }}
#define VPE_INT3_KEY(field)                                                        \
  {#field, [](RunConfig& c, const std::string& v) { c.field = to_int3(#field, v); }, \
   [](const RunConfig& c) { return int3_text(c.field); }}

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> table = {
      VPE_INT_KEY(input_size),
      VPE_INT_KEY(in_channels),
      VPE_INT_KEY(out_channels),
      VPE_INT_KEY(latent_dim),
      VPE_INT3_KEY(enc_channels),
      VPE_INT3_KEY(enc_kernels),
      VPE_INT_KEY(mc_samples),
      VPE_STRING_KEY(target_mode),
      VPE_DOUBLE_KEY(kl_weight),
      VPE_DOUBLE_KEY(leaky_slope),
      VPE_DOUBLE_KEY(bn_epsilon),
      VPE_DOUBLE_KEY(bn_momentum),
      VPE_INT_KEY(iterations),
      VPE_INT_KEY(batch_size),
      VPE_DOUBLE_KEY(learning_rate),
      VPE_DOUBLE_KEY(adam_beta1),
      VPE_DOUBLE_KEY(adam_beta2),
      VPE_DOUBLE_KEY(adam_epsilon),
      VPE_DOUBLE_KEY(proto_period),
      VPE_BOOL_KEY(augment),
      VPE_DOUBLE_KEY(aug_rotation_deg),
      VPE_DOUBLE_KEY(aug_flip_prob),
      VPE_INT_KEY(val_interval),
      VPE_STRING_KEY(data_dir),
      VPE_STRING_KEY(out_dir),
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      VPE_INT_KEY(threads),
      VPE_INT_KEY(classes),
      VPE_INT_KEY(unseen),
      VPE_INT_KEY(unseen_val),
      VPE_INT_KEY(per_class),
      VPE_INT_KEY(image_size),
      VPE_BOOL_KEY(imbalance),
      VPE_DOUBLE_KEY(imbalance_min_fraction),
      VPE_DOUBLE_KEY(perturb_rotation_deg),
      VPE_DOUBLE_KEY(perturb_scale_min),
      VPE_DOUBLE_KEY(perturb_scale_max),
      VPE_DOUBLE_KEY(perturb_shear),
      VPE_DOUBLE_KEY(perturb_perspective),
      VPE_DOUBLE_KEY(perturb_translate),
      VPE_DOUBLE_KEY(perturb_brightness),
      VPE_DOUBLE_KEY(perturb_contrast_min),
      VPE_DOUBLE_KEY(perturb_contrast_max),
      VPE_DOUBLE_KEY(perturb_color_shift),
      VPE_DOUBLE_KEY(perturb_blur_max),
      VPE_DOUBLE_KEY(perturb_noise_max),
      VPE_DOUBLE_KEY(perturb_occlusion_prob),
      VPE_DOUBLE_KEY(perturb_occlusion_max),
      VPE_INT_KEY(perturb_backgrounds),
  };
  return table;
}

#undef VPE_INT_KEY
#undef VPE_DOUBLE_KEY
#undef VPE_BOOL_KEY
#undef VPE_STRING_KEY
#undef VPE_INT3_KEY

}  // namespace

void RunConfig::apply_kv(const std::map<std::string, std::string>& kv,
                         const std::string& source) {
  for (const auto& [key, value] : kv) {
    bool known = false;
    for (const auto& binding : bindings()) {
      if (binding.key == key) {
        binding.set(*this, value);
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("config: unknown key '" + key + "' in " + source);
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_kv(parse_kv_text(text.str()), path.string());
}

void RunConfig::apply_env() {
  for (const auto& binding : bindings()) {
    std::string name = "VPE_";
    for (char c : binding.key) name += static_cast<char>(std::toupper(c));
    if (const char* value = std::getenv(name.c_str())) {
      binding.set(*this, value);
    }
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& binding : bindings()) {
    os << binding.key << " = " << binding.get(*this) << "\n";
  }
  return os.str();
}

VpeConfig RunConfig::vpe_config() const {
  VpeConfig cfg;
  cfg.input_size = input_size;
  cfg.in_channels = in_channels;
  cfg.out_channels = out_channels;
  cfg.latent_dim = latent_dim;
  for (int i = 0; i < 3; ++i) {
    cfg.encoder_plan[i].channels = enc_channels[i];
    cfg.encoder_plan[i].kernel = enc_kernels[i];
  }
  cfg.mc_samples = mc_samples;
  if (target_mode == "prototype") cfg.target_mode = TargetMode::kPrototype;
  else if (target_mode == "self") cfg.target_mode = TargetMode::kSelf;
  else throw ConfigError("config: target_mode must be 'prototype' or 'self'");
  cfg.kl_weight = static_cast<float>(kl_weight);
  cfg.leaky_slope = static_cast<float>(leaky_slope);
  cfg.bn_epsilon = static_cast<float>(bn_epsilon);
  cfg.bn_momentum = static_cast<float>(bn_momentum);
  cfg.validate();
  return cfg;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions opts;
  opts.iterations = iterations;
  opts.batch_size = batch_size;
  opts.proto_period = proto_period;
  opts.augment = augment;
  opts.augment_options.rotation_range_deg = static_cast<float>(aug_rotation_deg);
  opts.augment_options.flip_prob = static_cast<float>(aug_flip_prob);
  opts.lr = static_cast<float>(learning_rate);
  opts.beta1 = static_cast<float>(adam_beta1);
  opts.beta2 = static_cast<float>(adam_beta2);
  opts.adam_epsilon = static_cast<float>(adam_epsilon);
  opts.seed = seed;
  opts.val_interval = val_interval;
  if (opts.iterations < 1) throw ConfigError("config: iterations must be positive");
  if (opts.batch_size < 1) throw ConfigError("config: batch_size must be positive");
  return opts;
}

PerturbRanges RunConfig::perturb_ranges() const {
  PerturbRanges r;
  r.rotation_deg = static_cast<float>(perturb_rotation_deg);
  r.scale_min = static_cast<float>(perturb_scale_min);
  r.scale_max = static_cast<float>(perturb_scale_max);
  r.shear = static_cast<float>(perturb_shear);
  r.perspective = static_cast<float>(perturb_perspective);
  r.translate = static_cast<float>(perturb_translate);
  r.brightness = static_cast<float>(perturb_brightness);
  r.contrast_min = static_cast<float>(perturb_contrast_min);
  r.contrast_max = static_cast<float>(perturb_contrast_max);
  r.color_shift = static_cast<float>(perturb_color_shift);
  r.blur_max = static_cast<float>(perturb_blur_max);
  r.noise_max = static_cast<float>(perturb_noise_max);
  r.occlusion_prob = static_cast<float>(perturb_occlusion_prob);
  r.occlusion_max = static_cast<float>(perturb_occlusion_max);
  r.num_backgrounds = perturb_backgrounds;
  return r;
}

BenchmarkConfig RunConfig::benchmark_config() const {
  BenchmarkConfig cfg;
  cfg.n_classes = classes;
  cfg.n_unseen = unseen;
  cfg.n_unseen_val = unseen_val;
  cfg.per_class = per_class;
  cfg.image_size = image_size;
  cfg.imbalance = imbalance;
  cfg.imbalance_min_fraction = static_cast<float>(imbalance_min_fraction);
  cfg.seed = seed;
  cfg.perturb = perturb_ranges();
  return cfg;
}

}  // namespace vpe
