#pragma once

#include "tats/json_util.hpp"
#include "tats/padding.hpp"
#include "tats/quantizer.hpp"
#include "tats/video.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <optional>

namespace tats {


struct Checkpoint;

enum class NormKind { kBatchStat, kNone };

struct CodecConfig {
  int64_t in_channels = 1;
  int64_t temporal_rate = 4;  // d_t
  int64_t spatial_rate = 8;   // d_s
  int64_t base_channels = 16;
  bool channel_doubling = true;
  int64_t max_channels = 256;
  // Conv layers between input and latent: log2(max(d_t, d_s)) strided levels
  // plus (n_layers - levels) stride-1 layers at the bottleneck.
  int64_t n_layers = 3;
  int64_t embed_dim = 32;       // c
  int64_t codebook_size = 256;  // K
  double ema_decay = 0.99;
  double ema_epsilon = 1e-5;
  PaddingSpec padding;
  NormKind norm = NormKind::kBatchStat;

  int64_t temporal_levels() const;
  int64_t spatial_levels() const;
  int64_t levels() const;
  void validate() const;
};

Json to_json(const CodecConfig& config);
CodecConfig codec_config_from_json(const Json& j);

// 3D convolution whose temporal padding follows a PaddingMode; spatial
// padding is zero. In real_frame mode the temporal axis is not padded at all.
class TemporalConvImpl : public torch::nn::Module {
 public:
  TemporalConvImpl(int64_t in, int64_t out, int64_t kt, int64_t ks, int64_t st, int64_t ss, PaddingMode mode);
  torch::Tensor forward(const torch::Tensor& x);
  void set_mode(PaddingMode mode) { mode_ = mode; }
  int64_t temporal_pad() const { return pad_t_; }
  int64_t temporal_stride() const { return stride_t_; }

 private:
  torch::nn::Conv3d conv_{nullptr};
  int64_t pad_t_;
  int64_t stride_t_;
  PaddingMode mode_;
};
TORCH_MODULE(TemporalConv);

// Conv -> (batch-statistics norm) -> activation.
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(int64_t in, int64_t out, int64_t kt, int64_t ks, int64_t st, int64_t ss, PaddingMode mode, NormKind norm);
  torch::Tensor forward(torch::Tensor x);
  TemporalConv conv{nullptr};

 private:
  torch::nn::BatchNorm3d norm_{nullptr};
};
TORCH_MODULE(ConvBlock);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const CodecConfig& config);
  // B x C x T x H x W -> B x c x t x h x w. In real_frame mode the input must
  // carry real_frames_required() context frames on each temporal side.
  torch::Tensor forward(const torch::Tensor& x);
  void set_mode(PaddingMode mode);
  // Context frames per side for which valid (unpadded) temporal convolutions
  // yield exactly T / d_t output slices.
  int64_t receptive_padding() const;

 private:
  std::vector<ConvBlock> blocks_;
  TemporalConv out_{nullptr};
};
TORCH_MODULE(Encoder);

class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const CodecConfig& config);
  // B x c x t x h x w -> B x C x T x H x W in [-1, 1].
  torch::Tensor forward(const torch::Tensor& z);
  void set_mode(PaddingMode mode);

 private:
  CodecConfig config_;
  ConvBlock in_{nullptr};
  std::vector<ConvBlock> extra_;
  std::vector<ConvBlock> ups_;
  TemporalConv out_{nullptr};
};
TORCH_MODULE(Decoder);

struct TemporalContext {
  torch::Tensor before;  // B x C x N x H x W real frames preceding the clip
  torch::Tensor after;   // B x C x N x H x W real frames following the clip
};

// Encoder + codebook + decoder. Tensors are channel-first batches.
class VideoCodec {
 public:
  explicit VideoCodec(const CodecConfig& config);

  const CodecConfig& config() const { return config_; }
  Encoder& encoder() { return encoder_; }
  Decoder& decoder() { return decoder_; }
  Codebook& codebook() { return codebook_; }
  const Codebook& codebook() const { return codebook_; }

  int64_t real_frames_required() const { return encoder_->receptive_padding(); }

  // B x C x T x H x W -> B x t x h x w x c continuous latents.
  torch::Tensor encode(const torch::Tensor& clips, const std::optional<TemporalContext>& context = std::nullopt);
  QuantizeResult quantize(const torch::Tensor& latents) const { return tats::quantize(latents, codebook_); }
  // B x t x h x w x c -> B x C x T x H x W.
  torch::Tensor decode(const torch::Tensor& embeddings);

  // Inference helpers (eval mode, no grad).
  torch::Tensor tokenize(const torch::Tensor& clips, const std::optional<TemporalContext>& context = std::nullopt);
  torch::Tensor detokenize(const torch::Tensor& tokens);

  void train(bool on = true);
  bool is_training() const { return encoder_->is_training(); }
  std::vector<torch::Tensor> parameters() const;

  void save(Checkpoint& ckpt, const std::string& prefix = "codec.") const;
  void load(const Checkpoint& ckpt, const std::string& prefix = "codec.");

  // Token grid shape (t, h, w) for a T x H x W input.
  std::array<int64_t, 3> token_shape(int64_t frames, int64_t height, int64_t width) const;

 private:
  CodecConfig config_;
  Encoder encoder_;
  Decoder decoder_;
  Codebook codebook_;
};

// Single-clip conveniences.
torch::Tensor encode(VideoCodec& codec, const VideoClip& clip, const std::optional<VideoClip>& before = std::nullopt,
                     const std::optional<VideoClip>& after = std::nullopt);
VideoClip decode(VideoCodec& codec, const torch::Tensor& embeddings);

// Fraction of tokens that agree between the encodings of x[s : s+T] and
// x[s+d : s+d+T] after re-aligning by one slice. `clip` must hold
// window + shift frames, plus real_frames_required() context frames on each
// side in real_frame mode (windows then start after the leading context).
// Normalised by the (t - 1) h w compared positions, so a perfectly
// time-agnostic encoder scores exactly 1.
double equivariance_score(VideoCodec& codec, const VideoClip& clip, int64_t window, int64_t shift);

}  // namespace tats
