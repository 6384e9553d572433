#pragma once

#include "tats/classifier.hpp"
#include "tats/json_util.hpp"
#include "tats/losses.hpp"
#include "tats/metrics.hpp"

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tats {

inline constexpr int64_t kEvalClipLength = 16;

// Non-overlapping 16-frame clips at offsets 0, 16, ...: one N x C x 16 x H x W
// tensor per offset. videos: N x C x T x H x W.
std::vector<torch::Tensor> clips_at_offsets(const torch::Tensor& videos, int64_t n_offsets);
int64_t available_offsets(const torch::Tensor& videos);

// Extracts features per offset and returns the fvd_delta curve.
std::vector<double> fvd_over_time(const torch::Tensor& videos, FeatureExtractor& extractor,
                                  const FeatureMatrix* reference = nullptr);

struct MetricReport {
  std::string extractor;
  std::vector<int64_t> offsets;  // in frames
  std::vector<double> fvd_delta;
  std::vector<double> ccs;
  std::vector<double> ics;
  std::optional<double> is_score;
  double kvd = 0;  // last offset vs first offset
  double color_corr_mean = 0;
  double color_corr_std = 0;
  // First vs last frame distance under the transition feature network
  // (a stand-in for LPIPS, which needs pretrained weights).
  std::optional<double> perceptual_transition_mean;
  std::optional<double> perceptual_transition_std;

  Json to_json() const;
};

struct EvalOptions {
  bool with_classifier_metrics = true;
  int64_t hist_bins = 16;
  // Feature network for the first/last frame perceptual distance; null skips it.
  LayerFeatureNet* transition_net = nullptr;
};

// Every metric over the given videos. `classifier` is required when
// options.with_classifier_metrics is set.
MetricReport evaluate_videos(const torch::Tensor& videos, FeatureExtractor& extractor, ClipClassifier* classifier,
                             const EvalOptions& options);

struct ConfidenceInterval {
  double estimate = 0;
  double lower = 0;
  double upper = 0;
};

// Percentile bootstrap over n items: `statistic` receives resampled indices.
ConfidenceInterval bootstrap_ci(int64_t n, const std::function<double(const std::vector<int64_t>&)>& statistic,
                                int64_t replicates, uint64_t seed, double level = 0.95);

struct PlotSeries {
  std::string name;
  std::vector<double> y;
  std::array<uint8_t, 3> color{0, 0, 0};
};

// Line chart PNG: series against shared x values, with axes, grid and a
// legend of colour swatches.
void write_line_plot(const std::filesystem::path& path, const std::vector<double>& x,
                     const std::vector<PlotSeries>& series, int64_t width = 480, int64_t height = 320);

}  // namespace tats
