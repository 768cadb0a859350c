#include "vpe/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vpe/errors.hpp"
#include "vpe/kv.hpp"

namespace vpe {

RankedRetrieval retrieve(std::span<const float> query_embedding,
                         const std::vector<std::vector<float>>& gallery,
                         const std::vector<int>& gallery_labels, int query_label) {
  if (gallery.empty()) throw std::invalid_argument("retrieve: empty gallery");
  if (gallery.size() != gallery_labels.size()) {
    throw std::invalid_argument("retrieve: gallery/label size mismatch");
  }
  RankedRetrieval out;
  out.query_label = query_label;
  out.items.reserve(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (gallery[i].size() != query_embedding.size()) {
      throw std::invalid_argument("retrieve: embedding dimension mismatch at item " +
                                  std::to_string(i));
    }
    double acc = 0.0;
    for (std::size_t d = 0; d < query_embedding.size(); ++d) {
      const double diff = static_cast<double>(query_embedding[d]) - gallery[i][d];
      acc += diff * diff;
    }
    out.items.push_back({i, std::sqrt(acc), gallery_labels[i]});
  }
  std::sort(out.items.begin(), out.items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.item_id < b.item_id;
  });
  return out;
}

double pr_auc(const RankedRetrieval& ranking) {
  std::size_t positives = 0;
  for (const auto& item : ranking.items) {
    if (item.true_label == ranking.query_label) ++positives;
  }
  if (positives == 0) {
    throw DataError("pr_auc: gallery holds no positives for class " +
                    std::to_string(ranking.query_label));
  }
  // Each positive advances recall by exactly 1/P, so the trapezoid areas can
  // be accumulated as sum((p_i + p_{i-1}) / 2) / P, which keeps the perfect
  // ranking at exactly 1.0.
  double acc = 0.0;
  double prev_precision = -1.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranking.items.size(); ++k) {
    if (ranking.items[k].true_label != ranking.query_label) continue;
    ++tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    if (prev_precision < 0.0) prev_precision = precision;  // anchor at the first positive
    acc += (precision + prev_precision) / 2.0;
    prev_precision = precision;
  }
  return acc / static_cast<double>(positives);
}

double dataset_pr_auc(const std::vector<RankedRetrieval>& rankings) {
  if (rankings.empty()) throw std::invalid_argument("dataset_pr_auc: no rankings");
  double acc = 0.0;
  for (const auto& r : rankings) acc += pr_auc(r);
  return acc / static_cast<double>(rankings.size());
}

Image average_image(const RankedRetrieval& ranking, std::size_t k,
                    const std::vector<Image>& gallery_images) {
  if (k == 0 || k > ranking.items.size()) {
    throw std::invalid_argument("average_image: k must be within the ranking size");
  }
  const Image& first = gallery_images.at(ranking.items[0].item_id);
  Tensor<double> acc(first.shape());
  for (std::size_t i = 0; i < k; ++i) {
    const Image& img = gallery_images.at(ranking.items[i].item_id);
    if (!img.same_shape(first)) {
      throw std::invalid_argument("average_image: gallery images disagree in shape");
    }
    for (std::size_t j = 0; j < img.numel(); ++j) acc[j] += img[j];
  }
  Image out(first.shape());
  for (std::size_t j = 0; j < out.numel(); ++j) {
    out[j] = static_cast<float>(acc[j] / static_cast<double>(k));
  }
  return out;
}

DistanceMatrix distance_heatmap(const std::vector<std::vector<float>>& real_embeddings,
                                const std::vector<int>& real_labels,
                                const std::vector<std::vector<float>>& prototype_embeddings,
                                const std::vector<int>& prototype_labels, bool normalize) {
  if (real_embeddings.size() != real_labels.size() ||
      prototype_embeddings.size() != prototype_labels.size()) {
    throw std::invalid_argument("distance_heatmap: embedding/label size mismatch");
  }
  DistanceMatrix m;
  m.row_labels = real_labels;
  std::sort(m.row_labels.begin(), m.row_labels.end());
  m.row_labels.erase(std::unique(m.row_labels.begin(), m.row_labels.end()), m.row_labels.end());
  m.col_labels = prototype_labels;
  std::sort(m.col_labels.begin(), m.col_labels.end());
  for (int label : m.row_labels) {
    if (std::count(real_labels.begin(), real_labels.end(), label) == 0) {
      throw std::invalid_argument("distance_heatmap: class without real embeddings");
    }
  }
  m.values.assign(m.row_labels.size() * m.col_labels.size(), 0.0);
  std::vector<std::size_t> counts(m.row_labels.size(), 0);
  auto row_of = [&](int label) {
    return static_cast<std::size_t>(
        std::lower_bound(m.row_labels.begin(), m.row_labels.end(), label) - m.row_labels.begin());
  };
  for (std::size_t i = 0; i < real_embeddings.size(); ++i) {
    const std::size_t r = row_of(real_labels[i]);
    counts[r] += 1;
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) {
      double acc = 0.0;
      const auto& p = prototype_embeddings[c];
      for (std::size_t d = 0; d < p.size(); ++d) {
        const double diff = static_cast<double>(real_embeddings[i][d]) - p[d];
        acc += diff * diff;
      }
      m.values[r * m.col_labels.size() + c] += std::sqrt(acc);
    }
  }
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) {
      m.values[r * m.col_labels.size() + c] /= static_cast<double>(counts[r]);
    }
  }
  if (normalize) {
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) {
      double sum = 0.0;
      for (std::size_t r = 0; r < m.row_labels.size(); ++r) sum += m.at(r, c);
      if (sum > 0.0) {
        for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
          m.values[r * m.col_labels.size() + c] /= sum;
        }
      }
    }
    m.normalized = true;
  }
  return m;
}

void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& matrix) {
  std::ofstream out(path);
  if (!out) throw DataError("heatmap: cannot write " + path.string());
  out << "real_class";
  for (int c : matrix.col_labels) out << ",proto_" << c;
  out << "\n";
  for (std::size_t r = 0; r < matrix.row_labels.size(); ++r) {
    out << matrix.row_labels[r];
    for (std::size_t c = 0; c < matrix.col_labels.size(); ++c) {
      out << ',' << format_double(matrix.at(r, c));
    }
    out << "\n";
  }
}

namespace {

constexpr float kCategoryColors[][3] = {
    {0.85f, 0.15f, 0.15f}, {0.15f, 0.35f, 0.85f}, {0.15f, 0.7f, 0.25f}, {0.1f, 0.1f, 0.1f},
    {0.85f, 0.65f, 0.1f},  {0.6f, 0.2f, 0.7f},
};
constexpr int kNumCategoryColors = 6;

}  // namespace

Image render_heatmap(const DistanceMatrix& matrix, const std::map<int, int>& label_to_category,
                     std::size_t cell) {
  const std::size_t rows = matrix.row_labels.size(), cols = matrix.col_labels.size();
  const std::size_t band = label_to_category.empty() ? 0 : std::max<std::size_t>(2, cell / 3);
  const std::size_t h = rows * cell + band, w = cols * cell + band;
  Image out({3, h, w});
  out.fill(1.0f);

  double lo = matrix.values[0], hi = matrix.values[0];
  for (double v : matrix.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi > lo ? hi - lo : 1.0;

  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      // near = dark, far = light
      const float v = static_cast<float>((matrix.at(r, c) - lo) / range);
      for (std::size_t y = 0; y < cell; ++y) {
        for (std::size_t x = 0; x < cell; ++x) {
          for (std::size_t ch = 0; ch < 3; ++ch) {
            out.at3(ch, band + r * cell + y, band + c * cell + x) = v;
          }
        }
      }
    }
  }

  if (band > 0) {
    auto color_of = [&](int label) -> const float* {
      const auto it = label_to_category.find(label);
      const int cat = it == label_to_category.end() ? kNumCategoryColors - 1 : it->second;
      return kCategoryColors[((cat % kNumCategoryColors) + kNumCategoryColors) % kNumCategoryColors];
    };
    for (std::size_t r = 0; r < rows; ++r) {
      const float* col = color_of(matrix.row_labels[r]);
      for (std::size_t y = 0; y < cell; ++y) {
        for (std::size_t x = 0; x < band; ++x) {
          for (std::size_t ch = 0; ch < 3; ++ch) out.at3(ch, band + r * cell + y, x) = col[ch];
        }
      }
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const float* col = color_of(matrix.col_labels[c]);
      for (std::size_t y = 0; y < band; ++y) {
        for (std::size_t x = 0; x < cell; ++x) {
          for (std::size_t ch = 0; ch < 3; ++ch) out.at3(ch, y, band + c * cell + x) = col[ch];
        }
      }
    }
  }
  return out;
}

}  // namespace vpe
