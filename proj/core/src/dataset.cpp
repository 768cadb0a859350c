#include "vpe/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "vpe/errors.hpp"
#include "vpe/png_io.hpp"
#include "vpe/prototypes.hpp"
#include "vpe/rng.hpp"

namespace vpe {

namespace fs = std::filesystem;

std::string split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kVal: return "val";
    case SplitTag::kTest: return "test";
  }
  return "?";
}

std::vector<int> DatasetManifest::labels_with_split(SplitTag tag) const {
  std::vector<int> out;
  for (const auto& c : classes) {
    if (c.split == tag) out.push_back(c.label);
  }
  return out;
}

std::vector<int> DatasetManifest::unseen_labels() const {
  std::vector<int> out;
  for (const auto& c : classes) {
    if (c.unseen) out.push_back(c.label);
  }
  return out;
}

std::vector<int> DatasetManifest::seen_labels() const {
  std::vector<int> out;
  for (const auto& c : classes) {
    if (!c.unseen) out.push_back(c.label);
  }
  return out;
}

std::vector<int> DatasetManifest::all_labels() const {
  std::vector<int> out;
  for (const auto& c : classes) out.push_back(c.label);
  return out;
}

std::size_t DatasetManifest::total_real_images() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.real_paths.size();
  return n;
}

void BenchmarkConfig::validate() const {
  if (n_classes < 2) throw ConfigError("gen-data: need at least 2 classes");
  if (n_unseen < 2) throw ConfigError("gen-data: unseen count must be at least 2");
  if (n_unseen >= n_classes) {
    throw ConfigError("gen-data: unseen count (" + std::to_string(n_unseen) +
                      ") must be smaller than the class count (" + std::to_string(n_classes) +
                      ")");
  }
  if (n_unseen_val < 0 || n_unseen_val > n_unseen) {
    throw ConfigError("gen-data: unseen-val count must be within the unseen count");
  }
  if (per_class < 1) throw ConfigError("gen-data: per-class count must be positive");
  if (image_size < 8) throw ConfigError("gen-data: image size must be at least 8");
  if (imbalance && (imbalance_min_fraction <= 0.0f || imbalance_min_fraction > 1.0f)) {
    throw ConfigError("gen-data: imbalance min fraction must be in (0, 1]");
  }
}

namespace {

std::string class_name(int label) {
  std::ostringstream os;
  os << "class_" << (label < 10 ? "0" : "") << label;
  return os.str();
}

}  // namespace

DatasetManifest generate_benchmark(const fs::path& root, const BenchmarkConfig& config) {
  config.validate();

  const auto protos = render_prototypes(config.n_classes, config.seed,
                                        static_cast<std::size_t>(config.image_size));

  // Unseen assignment: deterministic shuffle of labels.
  std::vector<int> order(config.n_classes);
  for (int i = 0; i < config.n_classes; ++i) order[i] = i;
  Rng split_rng = Rng::stream(config.seed, "split");
  for (int i = config.n_classes - 1; i > 0; --i) {
    const int j = static_cast<int>(split_rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  std::set<int> unseen(order.begin(), order.begin() + config.n_unseen);
  std::set<int> unseen_val(order.begin(), order.begin() + config.n_unseen_val);

  // Per-class counts; optionally a geometric progression mimicking the
  // long-tailed class sizes of real symbol datasets.
  std::vector<int> counts(config.n_classes, config.per_class);
  if (config.imbalance && config.n_classes > 1) {
    const double ratio = std::pow(static_cast<double>(config.imbalance_min_fraction),
                                  1.0 / (config.n_classes - 1));
    double cur = config.per_class;
    for (int i = 0; i < config.n_classes; ++i) {
      counts[i] = std::max(1, static_cast<int>(std::lround(cur)));
      cur *= ratio;
    }
  }

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw DataError("gen-data: cannot create " + root.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.root = root;

  std::ostringstream splits;
  for (int label = 0; label < config.n_classes; ++label) {
    const std::string name = class_name(label);
    const fs::path dir = root / name;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("gen-data: cannot create " + dir.string() + ": " + ec.message());

    ClassEntry entry;
    entry.name = name;
    entry.label = label;
    entry.unseen = unseen.count(label) > 0;
    entry.split = entry.unseen ? (unseen_val.count(label) > 0 ? SplitTag::kVal : SplitTag::kTest)
                               : SplitTag::kTrain;

    entry.prototype_path = dir / "prototype.png";
    write_png(entry.prototype_path, protos[label]);

    Rng class_rng = Rng::stream(config.seed, "reals-" + name);
    for (int i = 0; i < counts[label]; ++i) {
      const PerturbationParams params = draw_perturbation(class_rng, config.perturb);
      const std::uint64_t image_seed = class_rng.next_u64();
      const Image real = perturb(protos[label], params, image_seed);
      std::ostringstream file;
      file << "real_" << std::setw(3) << std::setfill('0') << i << ".png";
      const fs::path path = dir / file.str();
      write_png(path, real);
      entry.real_paths.push_back(path);
    }
    splits << name << ' ' << (entry.unseen ? "unseen" : "seen") << ' '
           << split_tag_name(entry.split) << '\n';
    manifest.classes.push_back(std::move(entry));
  }

  std::ofstream out(root / "splits.txt");
  if (!out) throw DataError("gen-data: cannot write " + (root / "splits.txt").string());
  out << splits.str();
  return manifest;
}

DatasetManifest load_dataset(const fs::path& root) {
  const fs::path splits_path = root / "splits.txt";
  std::ifstream in(splits_path);
  if (!in) throw DataError("dataset: missing " + splits_path.string());

  struct Row {
    bool unseen;
    SplitTag split;
  };
  std::map<std::string, Row> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, seen_tag, split_tag;
    if (!(ls >> name >> seen_tag >> split_tag)) {
      throw DataError("dataset: malformed line " + std::to_string(line_no) + " in splits.txt");
    }
    if (rows.count(name)) {
      throw DataError("dataset: duplicate class '" + name + "' in splits.txt");
    }
    Row row;
    if (seen_tag == "seen") row.unseen = false;
    else if (seen_tag == "unseen") row.unseen = true;
    else throw DataError("dataset: class '" + name + "' has unknown tag '" + seen_tag + "'");
    if (split_tag == "train") row.split = SplitTag::kTrain;
    else if (split_tag == "val") row.split = SplitTag::kVal;
    else if (split_tag == "test") row.split = SplitTag::kTest;
    else throw DataError("dataset: class '" + name + "' has unknown split '" + split_tag + "'");
    rows.emplace(name, row);
  }
  if (rows.empty()) throw DataError("dataset: splits.txt lists no classes");

  DatasetManifest manifest;
  manifest.root = root;
  int label = 0;
  for (const auto& [name, row] : rows) {  // std::map: sorted by name
    const fs::path dir = root / name;
    if (!fs::is_directory(dir)) {
      throw DataError("dataset: class '" + name + "' listed in splits.txt has no directory");
    }
    ClassEntry entry;
    entry.name = name;
    entry.label = label++;
    entry.unseen = row.unseen;
    entry.split = row.split;
    entry.prototype_path = dir / "prototype.png";
    if (!fs::is_regular_file(entry.prototype_path)) {
      throw DataError("dataset: class '" + name + "' is missing prototype.png");
    }
    std::vector<fs::path> reals;
    for (const auto& de : fs::directory_iterator(dir)) {
      const std::string file = de.path().filename().string();
      if (file.rfind("real_", 0) == 0 && de.path().extension() == ".png") {
        reals.push_back(de.path());
      }
    }
    std::sort(reals.begin(), reals.end());
    entry.real_paths = std::move(reals);
    manifest.classes.push_back(std::move(entry));
  }
  return manifest;
}

PairedSample LoadedDataset::sample(int label, std::size_t real_index) const {
  PairedSample s;
  s.real = reals.at(label).at(real_index);
  s.prototype = prototypes.at(label);
  s.class_label = label;
  return s;
}

LoadedDataset load_images(const DatasetManifest& manifest, int input_size) {
  if (input_size <= 0) throw ConfigError("dataset: input size must be positive");
  LoadedDataset out;
  out.manifest = manifest;
  out.input_size = input_size;
  out.prototypes.resize(manifest.classes.size());
  out.reals.resize(manifest.classes.size());
  for (const auto& entry : manifest.classes) {
    out.prototypes[entry.label] =
        letterbox(read_png(entry.prototype_path), static_cast<std::size_t>(input_size));
    auto& bucket = out.reals[entry.label];
    bucket.reserve(entry.real_paths.size());
    for (const auto& path : entry.real_paths) {
      bucket.push_back(letterbox(read_png(path), static_cast<std::size_t>(input_size)));
    }
  }
  return out;
}

}  // namespace vpe
