#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "vpe/image.hpp"

// Prototype-to-real retrieval: full distance ranking of a gallery, the
// precision-recall AUC of that ranking, top-k average images and class-pair
// distance heat maps.

namespace vpe {

struct RankedItem {
  std::size_t item_id;
  double distance;
  int true_label;
};

struct RankedRetrieval {
  int query_label = 0;
  std::vector<RankedItem> items;  // ascending distance, ties by item id
};

RankedRetrieval retrieve(std::span<const float> query_embedding,
                         const std::vector<std::vector<float>>& gallery,
                         const std::vector<int>& gallery_labels, int query_label);

// Area under the precision-recall curve of a ranking. Precision is taken at
// each recall level (each positive's cutoff), integrated by trapezoid over
// recall; the segment before the first positive is anchored at its precision
// rather than interpolated toward recall zero.
double pr_auc(const RankedRetrieval& ranking);

// Unweighted mean over query classes.
double dataset_pr_auc(const std::vector<RankedRetrieval>& rankings);

Image average_image(const RankedRetrieval& ranking, std::size_t k,
                    const std::vector<Image>& gallery_images);

struct DistanceMatrix {
  std::vector<int> row_labels;  // real-image classes
  std::vector<int> col_labels;  // prototype classes
  std::vector<double> values;   // row-major means
  bool normalized = false;

  double at(std::size_t r, std::size_t c) const { return values[r * col_labels.size() + c]; }
};

// Entry (i, j) = mean distance from class-i real embeddings to prototype j;
// optional per-column l1 normalization.
DistanceMatrix distance_heatmap(const std::vector<std::vector<float>>& real_embeddings,
                                const std::vector<int>& real_labels,
                                const std::vector<std::vector<float>>& prototype_embeddings,
                                const std::vector<int>& prototype_labels, bool normalize);

void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& matrix);

// Linear grayscale ramp; optional label->category mapping adds color bands
// along both axes.
Image render_heatmap(const DistanceMatrix& matrix,
                     const std::map<int, int>& label_to_category = {}, std::size_t cell = 8);

}  // namespace vpe
