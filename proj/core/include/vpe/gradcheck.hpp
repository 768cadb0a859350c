#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "vpe/rng.hpp"
#include "vpe/tensor.hpp"

// Central finite-difference gradient checker. Runs in 64-bit only; this is
// the independent oracle every analytic backward in nn.hpp and model.hpp is
// validated against.

namespace vpe {

struct GradCheckItem {
  std::string name;
  TensorD* value;
  TensorD* grad;
};

struct GradCheckRow {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double max_rel_error = 0.0;

  const GradCheckRow& worst() const {
    return *std::max_element(rows.begin(), rows.end(),
                             [](const GradCheckRow& a, const GradCheckRow& b) {
                               return a.max_rel_error < b.max_rel_error;
                             });
  }
};

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coords_per_tensor = 200;  // subsampled beyond this
  std::uint64_t seed = 0x5eed;
};

// loss: pure scalar forward. compute_grads: zero + repopulate item.grad for
// the same loss. Each sampled coordinate is nudged by +/-step and the central
// difference compared against the analytic entry. The relative-error floor is
// tied to the tensor's gradient scale so a sign flip on any significant
// coordinate reports an error near 2 while FD noise on near-zero entries
// stays harmless.
inline GradCheckReport gradient_check(const std::function<double()>& loss,
                                      const std::function<void()>& compute_grads,
                                      const std::vector<GradCheckItem>& items,
                                      const GradCheckOptions& options = {}) {
  compute_grads();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(items.size());
  for (const auto& item : items) analytic.push_back(*item.grad);

  GradCheckReport report;
  Rng rng(options.seed);
  for (std::size_t t = 0; t < items.size(); ++t) {
    TensorD& value = *items[t].value;
    const TensorD& grad = analytic[t];
    const std::size_t n = value.numel();

    std::vector<std::size_t> coords;
    if (n <= options.max_coords_per_tensor) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      coords.reserve(options.max_coords_per_tensor);
      for (std::size_t i = 0; i < options.max_coords_per_tensor; ++i) {
        coords.push_back(rng.uniform_int(n));
      }
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(grad[i]));
    const double floor = std::max(1e-2 * scale, 1e-8);

    GradCheckRow row{items[t].name, 0.0, coords.size()};
    for (std::size_t ci : coords) {
      const double saved = value[ci];
      value[ci] = saved + options.step;
      const double plus = loss();
      value[ci] = saved - options.step;
      const double minus = loss();
      value[ci] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = grad[ci];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      row.max_rel_error = std::max(row.max_rel_error, rel);
    }
    report.rows.push_back(row);
    report.max_rel_error = std::max(report.max_rel_error, row.max_rel_error);
  }
  return report;
}

}  // namespace vpe
