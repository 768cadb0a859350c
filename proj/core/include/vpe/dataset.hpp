#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vpe/augment.hpp"
#include "vpe/image.hpp"
#include "vpe/perturb.hpp"

// Paired-dataset directory contract:
//   root/<class_name>/prototype.png
//   root/<class_name>/real_*.png
//   root/splits.txt        lines: "<class_name> <seen|unseen> <train|val|test>"

namespace vpe {

enum class SplitTag { kTrain, kVal, kTest };

std::string split_tag_name(SplitTag tag);

struct ClassEntry {
  std::string name;
  int label = 0;  // dense id, assigned by sorted class name
  bool unseen = false;
  SplitTag split = SplitTag::kTrain;
  std::filesystem::path prototype_path;
  std::vector<std::filesystem::path> real_paths;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ClassEntry> classes;  // ordered by label

  std::vector<int> labels_with_split(SplitTag tag) const;
  std::vector<int> unseen_labels() const;
  std::vector<int> seen_labels() const;
  std::vector<int> all_labels() const;
  const ClassEntry& by_label(int label) const { return classes.at(label); }
  std::size_t total_real_images() const;
};

// One training atom: a real view, its class prototype, and the label.
struct PairedSample {
  Image real;
  Image prototype;
  int class_label = 0;
  bool synthetic = true;
};

struct BenchmarkConfig {
  int n_classes = 30;
  int n_unseen = 10;
  int n_unseen_val = 0;     // unseen classes tagged val instead of test
  int per_class = 100;
  int image_size = 32;
  bool imbalance = false;   // geometric progression of per-class counts
  float imbalance_min_fraction = 0.1f;
  std::uint64_t seed = 7;
  PerturbRanges perturb;

  void validate() const;
};

// Renders prototypes, synthesizes per-class real views, writes the directory
// tree and splits.txt. Pure function of (root contents aside) config + seed.
DatasetManifest generate_benchmark(const std::filesystem::path& root,
                                   const BenchmarkConfig& config);

// Scans a directory in the contract above. Missing prototypes, duplicate
// class lines and unreadable files are each rejected with the class named.
DatasetManifest load_dataset(const std::filesystem::path& root);

// Everything letterboxed to input_size and held in memory; the benchmark
// corpus is small enough that lazy loading would only add failure modes.
struct LoadedDataset {
  DatasetManifest manifest;
  int input_size = 0;
  std::vector<Image> prototypes;            // by label
  std::vector<std::vector<Image>> reals;    // by label

  PairedSample sample(int label, std::size_t real_index) const;
};

LoadedDataset load_images(const DatasetManifest& manifest, int input_size);

}  // namespace vpe
