#include "vpe/trainer.hpp"

#include <fstream>

#include "vpe/errors.hpp"
#include "vpe/kv.hpp"
#include "vpe/oneshot.hpp"

namespace vpe {

std::vector<BatchSlot> draw_batch_plan(Rng& rng, const LoadedDataset& data,
                                       const std::vector<int>& train_labels, int batch_size,
                                       double proto_period) {
  std::vector<BatchSlot> plan;
  plan.reserve(static_cast<std::size_t>(batch_size));
  // Flat view over every training real image so sampling follows the actual
  // class frequencies.
  std::size_t total_reals = 0;
  for (int label : train_labels) total_reals += data.reals.at(label).size();
  const double proto_prob = proto_period > 0 ? 1.0 / proto_period : 0.0;
  for (int i = 0; i < batch_size; ++i) {
    BatchSlot slot{};
    if (rng.uniform() < proto_prob || total_reals == 0) {
      slot.prototype_draw = true;
      slot.label = train_labels[rng.uniform_int(train_labels.size())];
    } else {
      std::size_t flat = rng.uniform_int(total_reals);
      for (int label : train_labels) {
        const std::size_t n = data.reals.at(label).size();
        if (flat < n) {
          slot.label = label;
          slot.real_index = flat;
          break;
        }
        flat -= n;
      }
    }
    plan.push_back(slot);
  }
  return plan;
}

double validation_accuracy(VpeModelF& model, const LoadedDataset& data) {
  const auto val_labels = data.manifest.labels_with_split(SplitTag::kVal);
  if (val_labels.empty()) return -1.0;
  const SupportSet support = build_support(model, data, val_labels);
  std::vector<const Image*> queries;
  std::vector<int> truth;
  for (int label : val_labels) {
    for (const auto& img : data.reals.at(label)) {
      queries.push_back(&img);
      truth.push_back(label);
    }
  }
  if (queries.empty()) return -1.0;
  const auto embeddings = embed_images(model, queries);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (classify(embeddings[i], support) == truth[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(embeddings.size());
}

TrainResult train(VpeModelF& model, AdamState<float>& adam, const LoadedDataset& data,
                  const TrainOptions& options, const TrainHooks& hooks) {
  const VpeConfig& cfg = model.config();
  if (cfg.input_size != data.input_size) {
    throw ConfigError("train: dataset was loaded at " + std::to_string(data.input_size) +
                      " but the network expects " + std::to_string(cfg.input_size));
  }
  const auto train_labels = data.manifest.labels_with_split(SplitTag::kTrain);
  if (train_labels.empty()) throw DataError("train: dataset has no training classes");
  for (int label : train_labels) {
    if (data.prototypes.at(label).numel() == 0) {
      throw DataError("train: class '" + data.manifest.by_label(label).name +
                      "' lacks a prototype");
    }
    if (data.reals.at(label).empty()) {
      throw DataError("train: class '" + data.manifest.by_label(label).name +
                      "' has no real images");
    }
  }
  if (cfg.target_mode == TargetMode::kSelf && cfg.out_channels != cfg.in_channels) {
    throw ConfigError("train: self-target mode needs matching channel counts");
  }

  adam.lr = options.lr;
  adam.beta1 = options.beta1;
  adam.beta2 = options.beta2;
  adam.epsilon = options.adam_epsilon;

  Rng sampling = Rng::stream(options.seed, "sampling");
  Rng augment = Rng::stream(options.seed, "augmentation");
  Rng noise = Rng::stream(options.seed, "noise");

  const std::size_t n = static_cast<std::size_t>(options.batch_size);
  const std::size_t c = static_cast<std::size_t>(cfg.in_channels);
  const std::size_t s = static_cast<std::size_t>(cfg.input_size);
  const auto refs = model.parameters();

  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(options.iterations));

  for (int iter = 1; iter <= options.iterations; ++iter) {
    const auto plan = draw_batch_plan(sampling, data, train_labels, options.batch_size,
                                      options.proto_period);
    TensorF x({n, c, s, s});
    TensorF target({n, static_cast<std::size_t>(cfg.out_channels), s, s});
    for (std::size_t i = 0; i < n; ++i) {
      const auto& slot = plan[i];
      const Image& real = slot.prototype_draw ? data.prototypes.at(slot.label)
                                              : data.reals.at(slot.label)[slot.real_index];
      const Image& proto = data.prototypes.at(slot.label);
      Image in = real;
      Image out = cfg.target_mode == TargetMode::kSelf ? real : proto;
      if (options.augment) {
        const AugmentParams params = draw_augment(augment, options.augment_options);
        in = apply_augment(in, params);
        out = cfg.target_mode == TargetMode::kSelf ? in : apply_augment(out, params);
      }
      std::copy(in.data(), in.data() + in.numel(), x.data() + i * c * s * s);
      std::copy(out.data(), out.data() + out.numel(),
                target.data() + i * out.numel());
    }
    if (hooks.on_batch) hooks.on_batch(iter, x, target, plan);

    const TensorF eps = model.draw_noise(n, noise);
    model.zero_grads();
    const auto loss = model.loss_and_grads(x, target, eps);
    if (!std::isfinite(loss.total)) {
      throw NumericError("train: non-finite loss at iteration " + std::to_string(iter));
    }
    adam_step(refs, adam);
    result.trace.push_back({iter, static_cast<double>(loss.total),
                            static_cast<double>(loss.recon), static_cast<double>(loss.kl)});

    if (options.val_interval > 0 &&
        (iter % options.val_interval == 0 || iter == options.iterations)) {
      const double acc = validation_accuracy(model, data);
      if (acc >= 0.0) {
        const ValidationRow row{iter, acc};
        result.validation.push_back(row);
        if (acc > result.best_validation_accuracy) {
          result.best_validation_accuracy = acc;
          result.best_validation_iteration = iter;
        }
        if (hooks.on_validation) hooks.on_validation(row);
      }
    }
  }

  result.meta.train_iteration = static_cast<std::uint64_t>(options.iterations);
  result.meta.seed = options.seed;
  result.meta.rng_sampling_state = sampling.save_state();
  result.meta.rng_augment_state = augment.save_state();
  result.meta.rng_noise_state = noise.save_state();
  return result;
}

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw DataError("trace: cannot write " + path.string());
  out << "iteration,loss,recon,kl\n";
  for (const auto& row : trace) {
    out << row.iteration << ',' << format_double(row.loss) << ',' << format_double(row.recon)
        << ',' << format_double(row.kl) << "\n";
  }
}

void write_validation_csv(const std::filesystem::path& path,
                          const std::vector<ValidationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("validation: cannot write " + path.string());
  out << "iteration,accuracy\n";
  for (const auto& row : rows) {
    out << row.iteration << ',' << format_double(row.accuracy) << "\n";
  }
}

}  // namespace vpe
