#include "tats/video.hpp"

#include "tats/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace fs = std::filesystem;

namespace tats {

VideoClip::VideoClip(torch::Tensor frames, std::optional<double> frame_rate_hint)
    : frames_(frames.to(torch::kFloat32).contiguous()), frame_rate_hint_(frame_rate_hint) {
  if (frames_.dim() != 4) throw std::invalid_argument("VideoClip frames must be T x H x W x C");
  if (frames_.size(0) < 1) throw std::invalid_argument("VideoClip needs at least one frame");
  if (frames_.size(3) != 1 && frames_.size(3) != 3) throw std::invalid_argument("VideoClip needs 1 or 3 channels");
  if (!torch::isfinite(frames_).all().item<bool>()) throw std::invalid_argument("VideoClip has non-finite values");
  if (frames_.abs().max().item<float>() > 1.0f) throw std::invalid_argument("VideoClip values must lie in [-1, 1]");
  if (frame_rate_hint_ && !(*frame_rate_hint_ > 0)) throw std::invalid_argument("frame rate hint must be positive");
}

VideoClip VideoClip::from_channels_first(const torch::Tensor& cthw) { return VideoClip(cthw.permute({1, 2, 3, 0})); }

torch::Tensor stack_channels_first(const std::vector<VideoClip>& clips) {
  if (clips.empty()) throw std::invalid_argument("cannot stack an empty clip list");
  std::vector<torch::Tensor> parts;
  parts.reserve(clips.size());
  for (const auto& c : clips) parts.push_back(c.channels_first());
  return torch::stack(parts).contiguous();
}

std::vector<VideoClip> unstack_channels_first(const torch::Tensor& batch) {
  std::vector<VideoClip> clips;
  clips.reserve(static_cast<size_t>(batch.size(0)));
  for (int64_t i = 0; i < batch.size(0); ++i) clips.push_back(VideoClip::from_channels_first(batch[i].detach()));
  return clips;
}

VideoClip clip_window(const VideoClip& video, int64_t start, int64_t length) {
  if (start < 0 || length < 1 || start + length > video.length()) {
    throw std::out_of_range("clip window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                            ") outside video of length " + std::to_string(video.length()));
  }
  return VideoClip(video.frames().narrow(0, start, length), video.frame_rate_hint());
}

VideoClip clip_strided(const VideoClip& video, int64_t start, int64_t length, int64_t stride) {
  if (stride < 1) throw std::invalid_argument("frame stride must be positive");
  if (start < 0 || length < 1 || start + (length - 1) * stride >= video.length()) {
    throw std::out_of_range("strided window exceeds video length");
  }
  auto idx = torch::arange(start, start + length * stride, stride, torch::kInt64);
  return VideoClip(video.frames().index_select(0, idx), video.frame_rate_hint());
}

FrameDirectory read_frame_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("frame directory not found: " + root.string());
  std::vector<fs::path> video_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) video_dirs.push_back(entry.path());
  }
  std::sort(video_dirs.begin(), video_dirs.end());

  std::unordered_map<std::string, int64_t> label_map;
  if (std::ifstream tsv(root / "labels.tsv"); tsv) {
    std::string line;
    while (std::getline(tsv, line)) {
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string id;
      int64_t label = 0;
      if (!(fields >> id >> label)) throw std::runtime_error("malformed labels.tsv line: " + line);
      label_map[id] = label;
    }
  }

  FrameDirectory dir;
  for (const auto& vdir : video_dirs) {
    std::vector<fs::path> frames;
    for (const auto& entry : fs::directory_iterator(vdir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") frames.push_back(entry.path());
    }
    if (frames.empty()) continue;
    std::sort(frames.begin(), frames.end());
    std::vector<torch::Tensor> decoded;
    decoded.reserve(frames.size());
    for (const auto& f : frames) {
      auto px = read_png(f);
      if (px.size(2) == 4) px = px.narrow(2, 0, 3);
      if (!decoded.empty() && px.sizes() != decoded.front().sizes()) {
        throw std::runtime_error("inconsistent frame shape in " + vdir.string());
      }
      decoded.push_back(px);
    }
    const auto id = vdir.filename().string();
    dir.video_ids.push_back(id);
    dir.videos.emplace_back(from_uint8(torch::stack(decoded)));
    auto it = label_map.find(id);
    dir.labels.push_back(it == label_map.end() ? -1 : it->second);
  }
  return dir;
}

ClipSet sample_clips(const FrameDirectory& dir, const DatasetSpec& spec) {
  if (spec.clip_length < 1 || spec.frame_stride < 1 || spec.clips_per_video < 1) {
    throw std::invalid_argument("clip_length, frame_stride and clips_per_video must be positive");
  }
  const int64_t span = spec.clip_length * spec.frame_stride;
  std::mt19937_64 rng(spec.seed);
  ClipSet set;
  for (size_t v = 0; v < dir.videos.size(); ++v) {
    const auto& video = dir.videos[v];
    if (video.length() < span) {
      ++set.skipped;
      continue;
    }
    const int64_t max_start = video.length() - span;
    for (int64_t k = 0; k < spec.clips_per_video; ++k) {
      int64_t start = 0;
      if (spec.random_offsets) {
        start = std::uniform_int_distribution<int64_t>(0, max_start)(rng);
      } else {
        start = k * span;
        if (start > max_start) break;
      }
      set.clips.push_back(clip_strided(video, start, spec.clip_length, spec.frame_stride));
      set.labels.push_back(dir.labels[v]);
      set.video_ids.push_back(dir.video_ids[v]);
    }
  }
  return set;
}

ClipSet load_frame_directory(const fs::path& root, const DatasetSpec& spec) {
  return sample_clips(read_frame_directory(root), spec);
}

void write_frame_directory(const fs::path& root, const std::vector<VideoClip>& videos,
                           const std::vector<int64_t>& labels) {
  if (!labels.empty() && labels.size() != videos.size()) throw std::invalid_argument("one label per video required");
  fs::create_directories(root);
  std::ofstream tsv;
  if (!labels.empty()) tsv.open(root / "labels.tsv");
  for (size_t v = 0; v < videos.size(); ++v) {
    char id[32];
    std::snprintf(id, sizeof id, "video_%05zu", v);
    const auto vdir = root / id;
    fs::create_directories(vdir);
    const auto pixels = to_uint8(videos[v].frames());
    for (int64_t t = 0; t < pixels.size(0); ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "%06lld.png", static_cast<long long>(t));
      write_png(vdir / name, pixels[t]);
    }
    if (!labels.empty()) tsv << id << '\t' << labels[v] << '\n';
  }
}

std::pair<double, double> blob_center(int64_t class_id, int64_t t, double phase, double fixed_coord,
                                      std::pair<int64_t, int64_t> size, int64_t period) {
  const auto [height, width] = size;
  const double margin = 2.0;
  const double lo = margin;
  const double hi_x = static_cast<double>(width) - 1.0 - margin;
  const double hi_y = static_cast<double>(height) - 1.0 - margin;
  const double cycle = static_cast<double>(period * (1 + class_id / 4));
  const double u = static_cast<double>(t) / cycle + phase;
  const double frac = u - std::floor(u);
  const double tri = 1.0 - std::abs(2.0 * frac - 1.0);
  switch (class_id % 4) {
    case 0:
      return {lo + (hi_x - lo) * tri, fixed_coord};
    case 1:
      return {fixed_coord, lo + (hi_y - lo) * tri};
    case 2: {
      const double cx = (static_cast<double>(width) - 1.0) / 2.0;
      const double cy = (static_cast<double>(height) - 1.0) / 2.0;
      const double r = 0.3 * static_cast<double>(std::min(height, width));
      const double angle = 2.0 * std::numbers::pi * u;
      return {cx + r * std::cos(angle), cy + r * std::sin(angle)};
    }
    default:
      return {lo + (hi_x - lo) * tri, lo + (hi_y - lo) * tri};
  }
}

std::vector<LabeledClip> make_bouncing_blob_dataset(int64_t n_videos, int64_t length, std::pair<int64_t, int64_t> size,
                                                    int64_t n_classes, uint64_t seed,
                                                    const BlobDatasetOptions& options) {
  const auto [height, width] = size;
  if (n_videos < 1 || length < 1 || height < 5 || width < 5) throw std::invalid_argument("invalid blob dataset shape");
  if (n_classes < 1) throw std::invalid_argument("n_classes must be >= 1");
  if (options.channels != 1 && options.channels != 3) throw std::invalid_argument("channels must be 1 or 3");
  if (options.period < 2) throw std::invalid_argument("period must be >= 2");

  static constexpr double kPalette[6][3] = {{1, 1, 1}, {1, 0.2, 0.2}, {0.2, 1, 0.2}, {0.3, 0.5, 1}, {1, 1, 0.2}, {1, 0.3, 1}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LabeledClip> out;
  out.reserve(static_cast<size_t>(n_videos));
  for (int64_t v = 0; v < n_videos; ++v) {
    const int64_t cls = v % n_classes;
    const double phase = unit(rng);
    const double extent = static_cast<double>((cls % 4 == 0) ? height : width) - 5.0;
    const double fixed = 2.0 + extent * unit(rng);
    const auto& color = kPalette[static_cast<size_t>(unit(rng) * 6.0) % 6];

    auto frames = torch::empty({length, height, width, options.channels}, torch::kFloat32);
    auto acc = frames.accessor<float, 4>();
    const double inv = 1.0 / (2.0 * options.sigma * options.sigma);
    for (int64_t t = 0; t < length; ++t) {
      const auto [cx, cy] = blob_center(cls, t, phase, fixed, size, options.period);
      for (int64_t y = 0; y < height; ++y) {
        for (int64_t x = 0; x < width; ++x) {
          const double dx = static_cast<double>(x) - cx;
          const double dy = static_cast<double>(y) - cy;
          const double g = std::exp(-(dx * dx + dy * dy) * inv);
          for (int64_t c = 0; c < options.channels; ++c) {
            const double tint = options.channels == 1 ? 1.0 : color[c];
            acc[t][y][x][c] = static_cast<float>(-1.0 + 2.0 * g * tint);
          }
        }
      }
    }
    out.push_back({VideoClip(frames), cls});
  }
  return out;
}

}  // namespace tats
