#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vpe/dataset.hpp"
#include "vpe/model.hpp"

// One-shot nearest-neighbor evaluation: a support set of per-class prototype
// embeddings, Euclidean 1-NN over latent means, and the All/Unseen/mixed
// protocols.

namespace vpe {

struct SupportSet {
  std::vector<int> labels;                      // unique, ascending
  std::vector<std::vector<float>> embeddings;   // aligned with labels

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return embeddings.empty() ? 0 : embeddings.front().size(); }
  void add(int label, std::vector<float> embedding);
};

// Batched eval-mode latent means.
std::vector<std::vector<float>> embed_images(VpeModelF& model,
                                             const std::vector<const Image*>& images,
                                             std::size_t batch_size = 128);

SupportSet build_support(VpeModelF& model, const LoadedDataset& data,
                         std::vector<int> labels);

// Argmin of squared Euclidean distance; ties break toward the lowest label.
int classify(std::span<const float> query, const SupportSet& support);

// Independent naive route used to validate classify: materializes the full
// distance table first, then scans it. Small instances only.
std::vector<int> brute_force_nn_oracle(const std::vector<std::vector<float>>& queries,
                                       const SupportSet& support);

struct EvalProtocol {
  std::string name;
  std::vector<int> support_labels;
  std::vector<int> query_labels;
};

// Standard protocols over a loaded benchmark: "unseen" (unseen support,
// unseen queries), "mixed" (all-class support, unseen queries -- the
// seen+unseen scenario) and "all" (all-class support, every non-train query).
EvalProtocol make_protocol(const std::string& name, const DatasetManifest& manifest);

struct QueryRecord {
  std::string item_id;
  int true_label;
  int predicted_label;
  double distance;
};

struct PerClassAccuracy {
  int label;
  std::string name;
  std::size_t total = 0;
  std::size_t correct = 0;
};

struct EvalReport {
  std::string protocol;
  std::string checkpoint_id;
  double accuracy = 0.0;
  std::size_t n_queries = 0;
  std::vector<PerClassAccuracy> per_class;
  std::map<std::pair<int, int>, std::size_t> confusion;  // (true, predicted) -> count
  std::vector<QueryRecord> records;
};

EvalReport evaluate(VpeModelF& model, const LoadedDataset& data, const EvalProtocol& protocol,
                    const std::string& checkpoint_id = "");

void write_report_json(const std::filesystem::path& path, const EvalReport& report);
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace vpe
