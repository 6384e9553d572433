#include "tats/evaluation.hpp"

#include "tats/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <tuple>

namespace tats {

int64_t available_offsets(const torch::Tensor& videos) {
  if (videos.dim() != 5) throw std::invalid_argument("videos must be N x C x T x H x W");
  return videos.size(2) / kEvalClipLength;
}

std::vector<torch::Tensor> clips_at_offsets(const torch::Tensor& videos, int64_t n_offsets) {
  if (n_offsets < 1) throw std::invalid_argument("need at least one offset");
  if (available_offsets(videos) < n_offsets) {
    throw std::invalid_argument("videos of " + std::to_string(videos.size(2)) + " frames are shorter than " +
                                std::to_string(kEvalClipLength * n_offsets));
  }
  std::vector<torch::Tensor> clips;
  for (int64_t m = 0; m < n_offsets; ++m) {
    clips.push_back(videos.narrow(2, m * kEvalClipLength, kEvalClipLength).contiguous());
  }
  return clips;
}

std::vector<double> fvd_over_time(const torch::Tensor& videos, FeatureExtractor& extractor,
                                  const FeatureMatrix* reference) {
  std::vector<FeatureMatrix> feats;
  for (const auto& clips : clips_at_offsets(videos, available_offsets(videos))) feats.push_back(extractor.features(clips));
  return reference ? fvd_delta_curve(feats, *reference) : fvd_delta_curve(feats);
}

Json MetricReport::to_json() const {
  Json j{{"extractor", extractor}, {"offsets", offsets}, {"fvd_delta", fvd_delta}, {"ccs", ccs},
         {"ics", ics},             {"kvd", kvd},
         {"color_corr", Json{{"mean", color_corr_mean}, {"std", color_corr_std}}}};
  j["is"] = is_score ? Json(*is_score) : Json(nullptr);
  j["perceptual_transition"] =
      perceptual_transition_mean ? Json{{"mean", *perceptual_transition_mean}, {"std", *perceptual_transition_std}}
                                 : Json(nullptr);
  return j;
}

MetricReport evaluate_videos(const torch::Tensor& videos, FeatureExtractor& extractor, ClipClassifier* classifier,
                             const EvalOptions& options) {
  if (options.with_classifier_metrics && classifier == nullptr) {
    throw std::invalid_argument("CCS/ICS requested but no classifier is available");
  }
  const int64_t m = available_offsets(videos);
  if (m < 1) throw std::invalid_argument("videos are shorter than one 16-frame clip");
  const auto clips = clips_at_offsets(videos, m);

  MetricReport report;
  report.extractor = extractor.name();
  std::vector<FeatureMatrix> feats;
  for (int64_t i = 0; i < m; ++i) {
    report.offsets.push_back(i * kEvalClipLength);
    feats.push_back(extractor.features(clips[static_cast<size_t>(i)]));
  }
  report.fvd_delta = fvd_delta_curve(feats);
  if (videos.size(0) >= 2) report.kvd = kernel_distance(feats.back(), feats.front());

  if (options.with_classifier_metrics) {
    std::vector<Eigen::MatrixXd> probs;
    for (const auto& c : clips) probs.push_back(classifier->probabilities(c));
    for (const auto& p : probs) {
      report.ccs.push_back(ccs(p, probs.front()));
      report.ics.push_back(ics(p, probs.front()));
    }
    report.is_score = inception_score(probs.front());
  }

  // First vs last frame colour and perceptual statistics, per video.
  auto mean_std = [](const std::vector<double>& v) {
    double mean = 0;
    for (double c : v) mean += c;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double c : v) var += (c - mean) * (c - mean);
    return std::make_pair(mean, v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0);
  };
  std::vector<double> corr, transition;
  const int64_t t = videos.size(2);
  for (int64_t i = 0; i < videos.size(0); ++i) {
    auto first = videos[i].select(1, 0).permute({1, 2, 0});
    auto last = videos[i].select(1, t - 1).permute({1, 2, 0});
    corr.push_back(color_hist_correlation(first, last, options.hist_bins));
    if (options.transition_net != nullptr) {
      torch::NoGradGuard no_grad;
      auto a = videos[i].narrow(1, 0, 1).unsqueeze(0).to(torch::kFloat32);
      auto b = videos[i].narrow(1, t - 1, 1).unsqueeze(0).to(torch::kFloat32);
      transition.push_back(perceptual_loss(a, b, options.transition_net).item<double>());
    }
  }
  std::tie(report.color_corr_mean, report.color_corr_std) = mean_std(corr);
  if (!transition.empty()) {
    auto [m, sd] = mean_std(transition);
    report.perceptual_transition_mean = m;
    report.perceptual_transition_std = sd;
  }
  return report;
}

ConfidenceInterval bootstrap_ci(int64_t n, const std::function<double(const std::vector<int64_t>&)>& statistic,
                                int64_t replicates, uint64_t seed, double level) {
  if (n < 1 || replicates < 1) throw std::invalid_argument("bootstrap needs n >= 1 and replicates >= 1");
  std::vector<int64_t> all(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
  ConfidenceInterval ci;
  ci.estimate = statistic(all);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> pick(0, n - 1);
  std::vector<double> stats;
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t r = 0; r < replicates; ++r) {
    for (auto& v : idx) v = pick(rng);
    stats.push_back(statistic(idx));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, stats.size() - 1);
    return stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]);
  };
  ci.lower = quantile(alpha);
  ci.upper = quantile(1.0 - alpha);
  return ci;
}

namespace {

struct Canvas {
  int64_t w, h;
  std::vector<uint8_t> rgb;

  Canvas(int64_t width, int64_t height) : w(width), h(height), rgb(static_cast<size_t>(width * height * 3), 255) {}

  void set(int64_t x, int64_t y, const std::array<uint8_t, 3>& c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    for (int k = 0; k < 3; ++k) rgb[static_cast<size_t>((y * w + x) * 3 + k)] = c[static_cast<size_t>(k)];
  }

  void line(int64_t x0, int64_t y0, int64_t x1, int64_t y1, const std::array<uint8_t, 3>& c, int thick = 1) {
    const int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int64_t err = dx + dy;
    while (true) {
      for (int a = 0; a < thick; ++a) {
        for (int b = 0; b < thick; ++b) set(x0 + a, y0 + b, c);
      }
      if (x0 == x1 && y0 == y1) break;
      const int64_t e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void box(int64_t x0, int64_t y0, int64_t x1, int64_t y1, const std::array<uint8_t, 3>& c) {
    for (int64_t y = y0; y <= y1; ++y) {
      for (int64_t x = x0; x <= x1; ++x) set(x, y, c);
    }
  }
};

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::vector<double>& x,
                     const std::vector<PlotSeries>& series, int64_t width, int64_t height) {
  if (x.empty()) throw std::invalid_argument("plot needs at least one x value");
  double ymin = 0, ymax = 0;
  for (const auto& s : series) {
    if (s.y.size() != x.size()) throw std::invalid_argument("series '" + s.name + "' length differs from x");
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  const double xmin = *std::min_element(x.begin(), x.end());
  double xmax = *std::max_element(x.begin(), x.end());
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;

  const int64_t left = 40, right = width - 20, top = 20, bottom = height - 30;
  Canvas canvas(width, height);
  const std::array<uint8_t, 3> grid{225, 225, 225}, axis{60, 60, 60};
  for (int i = 0; i <= 4; ++i) {
    const int64_t gy = bottom - (bottom - top) * i / 4;
    const int64_t gx = left + (right - left) * i / 4;
    canvas.line(left, gy, right, gy, grid);
    canvas.line(gx, top, gx, bottom, grid);
  }
  auto px = [&](double v) { return left + static_cast<int64_t>(std::lround((v - xmin) / (xmax - xmin) * (right - left))); };
  auto py = [&](double v) { return bottom - static_cast<int64_t>(std::lround((v - ymin) / (ymax - ymin) * (bottom - top))); };
  canvas.line(left, bottom, right, bottom, axis, 2);
  canvas.line(left, top, left, bottom, axis, 2);
  if (ymin < 0) canvas.line(left, py(0), right, py(0), axis);

  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    for (size_t i = 0; i + 1 < x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || !std::isfinite(s.y[i + 1])) continue;
      canvas.line(px(x[i]), py(s.y[i]), px(x[i + 1]), py(s.y[i + 1]), s.color, 2);
    }
    for (size_t i = 0; i < x.size(); ++i) {
      if (std::isfinite(s.y[i])) canvas.box(px(x[i]) - 2, py(s.y[i]) - 2, px(x[i]) + 2, py(s.y[i]) + 2, s.color);
    }
    const auto lx = right - 14 - static_cast<int64_t>(k) * 16;
    canvas.box(lx, top - 14, lx + 10, top - 4, s.color);
  }

  auto image = torch::from_blob(canvas.rgb.data(), {height, width, 3}, torch::kUInt8).clone();
  write_png(path, image);
}

}  // namespace tats
