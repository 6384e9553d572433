#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tats {

// Dense video in [-1, 1], stored T x H x W x C (float32, contiguous).
class VideoClip {
 public:
  VideoClip() = default;
  explicit VideoClip(torch::Tensor frames, std::optional<double> frame_rate_hint = std::nullopt);

  const torch::Tensor& frames() const { return frames_; }
  int64_t length() const { return frames_.size(0); }
  int64_t height() const { return frames_.size(1); }
  int64_t width() const { return frames_.size(2); }
  int64_t channels() const { return frames_.size(3); }
  std::optional<double> frame_rate_hint() const { return frame_rate_hint_; }

  // Channel-first layout C x T x H x W used by the 3D conv stacks.
  torch::Tensor channels_first() const { return frames_.permute({3, 0, 1, 2}); }
  static VideoClip from_channels_first(const torch::Tensor& cthw);

 private:
  torch::Tensor frames_;
  std::optional<double> frame_rate_hint_;
};

struct LabeledClip {
  VideoClip clip;
  int64_t class_id = 0;
};

enum class DatasetSource { kFrameDirectory, kSyntheticGenerator };

struct DatasetSpec {
  DatasetSource source = DatasetSource::kFrameDirectory;
  int64_t clip_length = 16;
  int64_t frame_stride = 1;
  uint64_t seed = 0;
  // Draw each clip's start frame uniformly (seeded) instead of starting at 0.
  bool random_offsets = false;
  int64_t clips_per_video = 1;
};

// Stacks clips into a B x C x T x H x W batch.
torch::Tensor stack_channels_first(const std::vector<VideoClip>& clips);
std::vector<VideoClip> unstack_channels_first(const torch::Tensor& batch);

// Frames [start, start + length).
VideoClip clip_window(const VideoClip& video, int64_t start, int64_t length);
// Frames start, start + stride, ... (length frames).
VideoClip clip_strided(const VideoClip& video, int64_t start, int64_t length, int64_t stride);

struct FrameDirectory {
  std::vector<std::string> video_ids;
  std::vector<VideoClip> videos;
  // -1 where labels.tsv has no entry (or is absent).
  std::vector<int64_t> labels;
};

// Reads <root>/<video_id>/<%06d>.png (lexicographic frame order) and the
// optional labels.tsv. Pixel values map linearly from [0, 255] to [-1, 1].
FrameDirectory read_frame_directory(const std::filesystem::path& root);

struct ClipSet {
  std::vector<VideoClip> clips;
  std::vector<int64_t> labels;
  std::vector<std::string> video_ids;
  int64_t skipped = 0;
};

// Windows of spec.clip_length frames taken every spec.frame_stride frames.
// Videos shorter than clip_length * frame_stride are skipped and counted.
ClipSet sample_clips(const FrameDirectory& dir, const DatasetSpec& spec);
ClipSet load_frame_directory(const std::filesystem::path& root, const DatasetSpec& spec);

void write_frame_directory(const std::filesystem::path& root, const std::vector<VideoClip>& videos,
                           const std::vector<int64_t>& labels = {});

struct BlobDatasetOptions {
  int64_t channels = 1;
  int64_t period = 8;
  double sigma = 1.5;
};

// Synthetic stand-in for benchmark corpora: one Gaussian blob per video whose
// motion pattern is determined by the class (0 horizontal bounce, 1 vertical
// bounce, 2 circle, 3 diagonal bounce, higher classes reuse the four patterns
// at multiples of the base period). Video i has class i % n_classes.
std::vector<LabeledClip> make_bouncing_blob_dataset(int64_t n_videos, int64_t length, std::pair<int64_t, int64_t> size,
                                                    int64_t n_classes, uint64_t seed,
                                                    const BlobDatasetOptions& options = {});

// Blob center (x, y) of video `index` at frame `t`; the generator's ground truth.
std::pair<double, double> blob_center(int64_t class_id, int64_t t, double phase, double fixed_coord,
                                      std::pair<int64_t, int64_t> size, int64_t period);

}  // namespace tats
