#include "vpe/oneshot.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vpe/errors.hpp"
#include "vpe/kv.hpp"

namespace vpe {

void SupportSet::add(int label, std::vector<float> embedding) {
  if (std::find(labels.begin(), labels.end(), label) != labels.end()) {
    throw std::invalid_argument("support: duplicate class " + std::to_string(label));
  }
  if (!embeddings.empty() && embeddings.front().size() != embedding.size()) {
    throw std::invalid_argument("support: embedding dimension mismatch");
  }
  // keep ascending label order
  const auto pos = std::upper_bound(labels.begin(), labels.end(), label);
  const auto idx = static_cast<std::size_t>(pos - labels.begin());
  labels.insert(pos, label);
  embeddings.insert(embeddings.begin() + static_cast<std::ptrdiff_t>(idx), std::move(embedding));
}

std::vector<std::vector<float>> embed_images(VpeModelF& model,
                                             const std::vector<const Image*>& images,
                                             std::size_t batch_size) {
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  const auto& cfg = model.config();
  const std::size_t c = static_cast<std::size_t>(cfg.in_channels);
  const std::size_t s = static_cast<std::size_t>(cfg.input_size);
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, images.size() - start);
    TensorF batch({n, c, s, s});
    for (std::size_t i = 0; i < n; ++i) {
      const Image& img = *images[start + i];
      if (img.numel() != c * s * s) {
        throw std::invalid_argument("embed: image shape " + img.shape_string() +
                                    " does not match network input");
      }
      std::copy(img.data(), img.data() + img.numel(), batch.data() + i * c * s * s);
    }
    const TensorF mean = model.embed(batch);
    const std::size_t d = mean.extent(1);
    for (std::size_t i = 0; i < n; ++i) {
      out.emplace_back(mean.data() + i * d, mean.data() + (i + 1) * d);
    }
  }
  return out;
}

SupportSet build_support(VpeModelF& model, const LoadedDataset& data, std::vector<int> labels) {
  std::sort(labels.begin(), labels.end());
  std::vector<const Image*> protos;
  protos.reserve(labels.size());
  for (int label : labels) protos.push_back(&data.prototypes.at(label));
  auto embeddings = embed_images(model, protos);
  SupportSet support;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    support.add(labels[i], std::move(embeddings[i]));
  }
  return support;
}

namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

}  // namespace

int classify(std::span<const float> query, const SupportSet& support) {
  if (support.size() == 0) throw std::invalid_argument("classify: empty support set");
  if (query.size() != support.dim()) {
    throw std::invalid_argument("classify: query dimension " + std::to_string(query.size()) +
                                " vs support dimension " + std::to_string(support.dim()));
  }
  int best = support.labels[0];
  double best_dist = squared_distance(query, support.embeddings[0]);
  for (std::size_t i = 1; i < support.size(); ++i) {
    const double d = squared_distance(query, support.embeddings[i]);
    if (d < best_dist) {  // strict: the earlier (lower) label wins ties
      best_dist = d;
      best = support.labels[i];
    }
  }
  return best;
}

std::vector<int> brute_force_nn_oracle(const std::vector<std::vector<float>>& queries,
                                       const SupportSet& support) {
  if (support.size() == 0) throw std::invalid_argument("oracle: empty support set");
  // Full distance table first, then a scan; deliberately the dumbest route.
  std::vector<std::vector<double>> table(queries.size(),
                                         std::vector<double>(support.size(), 0.0));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t s = 0; s < support.size(); ++s) {
      table[q][s] = squared_distance(queries[q], support.embeddings[s]);
    }
  }
  std::vector<int> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < support.size(); ++s) {
      if (table[q][s] < table[q][best]) best = s;
    }
    out[q] = support.labels[best];
  }
  return out;
}

EvalProtocol make_protocol(const std::string& name, const DatasetManifest& manifest) {
  EvalProtocol protocol;
  protocol.name = name;
  if (name == "unseen") {
    protocol.support_labels = manifest.unseen_labels();
    protocol.query_labels = protocol.support_labels;
  } else if (name == "mixed") {
    protocol.support_labels = manifest.all_labels();
    protocol.query_labels = manifest.unseen_labels();
  } else if (name == "all") {
    protocol.support_labels = manifest.all_labels();
    for (const auto& entry : manifest.classes) {
      if (entry.split != SplitTag::kTrain) protocol.query_labels.push_back(entry.label);
    }
  } else {
    throw ConfigError("protocol must be one of unseen|mixed|all, got '" + name + "'");
  }
  if (protocol.query_labels.empty()) {
    throw DataError("protocol '" + name + "': no query classes available");
  }
  return protocol;
}

EvalReport evaluate(VpeModelF& model, const LoadedDataset& data, const EvalProtocol& protocol,
                    const std::string& checkpoint_id) {
  const SupportSet support = build_support(model, data, protocol.support_labels);

  for (int label : protocol.query_labels) {
    if (std::find(support.labels.begin(), support.labels.end(), label) ==
        support.labels.end()) {
      throw DataError("evaluate: query class '" + data.manifest.by_label(label).name +
                      "' is absent from the support set");
    }
  }

  EvalReport report;
  report.protocol = protocol.name;
  report.checkpoint_id = checkpoint_id;

  std::vector<const Image*> query_images;
  std::vector<int> query_labels;
  std::vector<std::string> query_ids;
  for (int label : protocol.query_labels) {
    const auto& entry = data.manifest.by_label(label);
    for (std::size_t i = 0; i < data.reals.at(label).size(); ++i) {
      query_images.push_back(&data.reals.at(label)[i]);
      query_labels.push_back(label);
      query_ids.push_back(entry.name + "/" + entry.real_paths[i].filename().string());
    }
  }
  const auto query_embeddings = embed_images(model, query_images);

  std::map<int, PerClassAccuracy> per_class;
  for (int label : protocol.query_labels) {
    per_class[label] = {label, data.manifest.by_label(label).name, 0, 0};
  }

  std::size_t correct = 0;
  for (std::size_t q = 0; q < query_embeddings.size(); ++q) {
    const int predicted = classify(query_embeddings[q], support);
    const int truth = query_labels[q];
    const auto it = std::find(support.labels.begin(), support.labels.end(), predicted);
    const double dist =
        squared_distance(query_embeddings[q],
                         support.embeddings[static_cast<std::size_t>(it - support.labels.begin())]);
    report.records.push_back({query_ids[q], truth, predicted, std::sqrt(dist)});
    report.confusion[{truth, predicted}] += 1;
    per_class[truth].total += 1;
    if (predicted == truth) {
      ++correct;
      per_class[truth].correct += 1;
    }
  }
  report.n_queries = query_embeddings.size();
  report.accuracy =
      report.n_queries == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(report.n_queries);
  for (auto& [label, row] : per_class) report.per_class.push_back(row);
  return report;
}

void write_report_json(const std::filesystem::path& path, const EvalReport& report) {
  nlohmann::json j;
  j["protocol"] = report.protocol;
  j["checkpoint"] = report.checkpoint_id;
  j["accuracy"] = report.accuracy;
  j["n_queries"] = report.n_queries;
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& row : report.per_class) {
    per_class.push_back({{"label", row.label},
                         {"class", row.name},
                         {"total", row.total},
                         {"correct", row.correct},
                         {"accuracy", row.total ? static_cast<double>(row.correct) / row.total : 0.0}});
  }
  j["per_class"] = per_class;
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& [key, count] : report.confusion) {
    confusion.push_back({{"true", key.first}, {"predicted", key.second}, {"count", count}});
  }
  j["confusion"] = confusion;
  std::ofstream out(path);
  if (!out) throw DataError("report: cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("report: cannot write " + path.string());
  out << "query_id,true_label,predicted_label,distance\n";
  for (const auto& rec : report.records) {
    out << rec.item_id << ',' << rec.true_label << ',' << rec.predicted_label << ','
        << format_double(rec.distance) << "\n";
  }
}

}  // namespace vpe
