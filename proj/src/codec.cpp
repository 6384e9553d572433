#include "tats/codec.hpp"

#include "tats/checkpoint.hpp"
#include "tats/error.hpp"

#include <bit>
#include <stdexcept>

namespace tats {

namespace {

int64_t log2_exact(int64_t v, const char* what) {
  if (v < 1 || !std::has_single_bit(static_cast<uint64_t>(v))) {
    throw ConfigError(std::string(what) + " must be a power of two");
  }
  return std::countr_zero(static_cast<uint64_t>(v));
}

std::vector<int64_t> level_channels(const CodecConfig& c) {
  std::vector<int64_t> ch{c.base_channels};
  for (int64_t l = 0; l < c.levels(); ++l) {
    ch.push_back(c.channel_doubling ? std::min(ch.back() * 2, c.max_channels) : ch.back());
  }
  return ch;
}

PaddingMode decoder_mode(PaddingMode mode) {
  // There are no real latent frames to pad the decoder with.
  return mode == PaddingMode::kRealFrame ? PaddingMode::kReplicate : mode;
}

std::string norm_name(NormKind n) { return n == NormKind::kBatchStat ? "batch_stat" : "none"; }

}  // namespace

int64_t CodecConfig::temporal_levels() const { return log2_exact(temporal_rate, "temporal_rate"); }
int64_t CodecConfig::spatial_levels() const { return log2_exact(spatial_rate, "spatial_rate"); }
int64_t CodecConfig::levels() const { return std::max(temporal_levels(), spatial_levels()); }

void CodecConfig::validate() const {
  if (in_channels != 1 && in_channels != 3) throw ConfigError("codec in_channels must be 1 or 3");
  levels();
  if (n_layers < levels()) throw ConfigError("codec n_layers must be >= log2(max(d_t, d_s))");
  if (base_channels < 1 || max_channels < base_channels) throw ConfigError("invalid codec channel widths");
  if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
  if (codebook_size < 2) throw ConfigError("codebook_size must be >= 2");
  if (!(ema_decay > 0 && ema_decay < 1) || !(ema_epsilon > 0)) throw ConfigError("invalid EMA constants");
  padding.validate();
}

Json to_json(const CodecConfig& c) {
  return Json{{"in_channels", c.in_channels},
              {"temporal_rate", c.temporal_rate},
              {"spatial_rate", c.spatial_rate},
              {"base_channels", c.base_channels},
              {"channel_doubling", c.channel_doubling},
              {"max_channels", c.max_channels},
              {"n_layers", c.n_layers},
              {"embed_dim", c.embed_dim},
              {"codebook_size", c.codebook_size},
              {"ema_decay", c.ema_decay},
              {"ema_epsilon", c.ema_epsilon},
              {"padding", to_string(c.padding.mode)},
              {"real_frames_per_side", c.padding.real_frames_per_side},
              {"norm", norm_name(c.norm)}};
}

CodecConfig codec_config_from_json(const Json& j) {
  CodecConfig c;
  std::string padding = to_string(c.padding.mode);
  std::string norm = norm_name(c.norm);
  StrictReader r(j, "codec");
  r.read("in_channels", c.in_channels)
      .read("temporal_rate", c.temporal_rate)
      .read("spatial_rate", c.spatial_rate)
      .read("base_channels", c.base_channels)
      .read("channel_doubling", c.channel_doubling)
      .read("max_channels", c.max_channels)
      .read("n_layers", c.n_layers)
      .read("embed_dim", c.embed_dim)
      .read("codebook_size", c.codebook_size)
      .read("ema_decay", c.ema_decay)
      .read("ema_epsilon", c.ema_epsilon)
      .read("padding", padding)
      .read("real_frames_per_side", c.padding.real_frames_per_side)
      .read("norm", norm);
  r.finish();
  c.padding.mode = parse_padding_mode(padding);
  if (norm == "batch_stat") {
    c.norm = NormKind::kBatchStat;
  } else if (norm == "none") {
    c.norm = NormKind::kNone;
  } else {
    throw ConfigError("codec.norm must be batch_stat or none");
  }
  c.validate();
  return c;
}

TemporalConvImpl::TemporalConvImpl(int64_t in, int64_t out, int64_t kt, int64_t ks, int64_t st, int64_t ss,
                                   PaddingMode mode)
    : pad_t_((kt - st) / 2), stride_t_(st), mode_(mode) {
  const int64_t pad_s = (ks - ss) / 2;
  conv_ = register_module(
      "conv", torch::nn::Conv3d(torch::nn::Conv3dOptions(in, out, {kt, ks, ks}).stride({st, ss, ss}).padding({0, pad_s, pad_s})));
}

torch::Tensor TemporalConvImpl::forward(const torch::Tensor& x) {
  if (mode_ == PaddingMode::kRealFrame) return conv_(x);
  return conv_(pad_temporal(x, mode_, pad_t_, 2));
}

ConvBlockImpl::ConvBlockImpl(int64_t in, int64_t out, int64_t kt, int64_t ks, int64_t st, int64_t ss, PaddingMode mode,
                             NormKind norm) {
  conv = register_module("conv", TemporalConv(in, out, kt, ks, st, ss, mode));
  if (norm == NormKind::kBatchStat) norm_ = register_module("norm", torch::nn::BatchNorm3d(out));
}

torch::Tensor ConvBlockImpl::forward(torch::Tensor x) {
  x = conv(x);
  if (!norm_.is_empty()) x = norm_(x);
  return torch::silu(x);
}

EncoderImpl::EncoderImpl(const CodecConfig& config) {
  config.validate();
  const auto ch = level_channels(config);
  const auto mode = config.padding.mode;
  blocks_.push_back(ConvBlock(config.in_channels, ch[0], 3, 3, 1, 1, mode, config.norm));
  for (int64_t l = 0; l < config.levels(); ++l) {
    const bool t_down = l < config.temporal_levels();
    const bool s_down = l < config.spatial_levels();
    blocks_.push_back(ConvBlock(ch[static_cast<size_t>(l)], ch[static_cast<size_t>(l + 1)], t_down ? 4 : 3,
                                s_down ? 4 : 3, t_down ? 2 : 1, s_down ? 2 : 1, mode, config.norm));
  }
  for (int64_t e = config.levels(); e < config.n_layers; ++e) {
    blocks_.push_back(ConvBlock(ch.back(), ch.back(), 3, 3, 1, 1, mode, config.norm));
  }
  for (size_t i = 0; i < blocks_.size(); ++i) register_module("block" + std::to_string(i), blocks_[i]);
  out_ = register_module("out", TemporalConv(ch.back(), config.embed_dim, 1, 1, 1, 1, mode));
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& x) {
  auto h = x;
  for (auto& b : blocks_) h = b(h);
  return out_(h);
}

void EncoderImpl::set_mode(PaddingMode mode) {
  for (auto& b : blocks_) b->conv->set_mode(mode);
  out_->set_mode(mode);
}

int64_t EncoderImpl::receptive_padding() const {
  int64_t total = 0;
  int64_t stride = 1;
  for (const auto& b : blocks_) {
    total += b->conv->temporal_pad() * stride;
    stride *= b->conv->temporal_stride();
  }
  return total + out_->temporal_pad() * stride;
}

DecoderImpl::DecoderImpl(const CodecConfig& config) : config_(config) {
  config.validate();
  const auto ch = level_channels(config);
  const auto mode = decoder_mode(config.padding.mode);
  in_ = register_module("in", ConvBlock(config.embed_dim, ch.back(), 3, 3, 1, 1, mode, config.norm));
  for (int64_t e = config.levels(); e < config.n_layers; ++e) {
    extra_.push_back(ConvBlock(ch.back(), ch.back(), 3, 3, 1, 1, mode, config.norm));
    register_module("extra" + std::to_string(extra_.size() - 1), extra_.back());
  }
  for (int64_t l = config.levels() - 1; l >= 0; --l) {
    ups_.push_back(ConvBlock(ch[static_cast<size_t>(l + 1)], ch[static_cast<size_t>(l)], 3, 3, 1, 1, mode, config.norm));
    register_module("up" + std::to_string(l), ups_.back());
  }
  out_ = register_module("out", TemporalConv(ch[0], config.in_channels, 3, 3, 1, 1, mode));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& z) {
  auto h = in_(z);
  for (auto& b : extra_) h = b(h);
  int64_t l = config_.levels() - 1;
  for (auto& b : ups_) {
    if (l < config_.temporal_levels()) h = h.repeat_interleave(2, 2);
    if (l < config_.spatial_levels()) h = h.repeat_interleave(2, 3).repeat_interleave(2, 4);
    h = b(h);
    --l;
  }
  return torch::tanh(out_(h));
}

void DecoderImpl::set_mode(PaddingMode mode) {
  const auto m = decoder_mode(mode);
  in_->conv->set_mode(m);
  for (auto& b : extra_) b->conv->set_mode(m);
  for (auto& b : ups_) b->conv->set_mode(m);
  out_->set_mode(m);
}

VideoCodec::VideoCodec(const CodecConfig& config)
    : config_(config),
      encoder_(config),
      decoder_(config),
      codebook_(Codebook::random(config.codebook_size, config.embed_dim, 1.0, config.ema_decay, config.ema_epsilon)) {
  if (config.padding.mode == PaddingMode::kRealFrame &&
      config.padding.real_frames_per_side < encoder_->receptive_padding()) {
    throw ConfigError("real_frame padding needs real_frames_per_side >= " +
                      std::to_string(encoder_->receptive_padding()));
  }
}

std::array<int64_t, 3> VideoCodec::token_shape(int64_t frames, int64_t height, int64_t width) const {
  if (frames % config_.temporal_rate != 0) {
    throw std::invalid_argument("clip length " + std::to_string(frames) + " is not divisible by temporal rate " +
                                std::to_string(config_.temporal_rate));
  }
  if (height % config_.spatial_rate != 0 || width % config_.spatial_rate != 0) {
    throw std::invalid_argument("frame size is not divisible by spatial rate " + std::to_string(config_.spatial_rate));
  }
  return {frames / config_.temporal_rate, height / config_.spatial_rate, width / config_.spatial_rate};
}

torch::Tensor VideoCodec::encode(const torch::Tensor& clips, const std::optional<TemporalContext>& context) {
  if (clips.dim() != 5 || clips.size(1) != config_.in_channels) {
    throw std::invalid_argument("encode expects B x C x T x H x W with C = " + std::to_string(config_.in_channels));
  }
  token_shape(clips.size(2), clips.size(3), clips.size(4));
  torch::Tensor input = clips;
  if (config_.padding.mode == PaddingMode::kRealFrame) {
    const int64_t need = real_frames_required();
    if (!context || context->before.size(2) < need || context->after.size(2) < need) {
      throw std::invalid_argument("real_frame encoding needs " + std::to_string(need) + " context frames per side");
    }
    const auto& before = context->before;
    input = torch::cat({before.narrow(2, before.size(2) - need, need), clips, context->after.narrow(2, 0, need)}, 2);
  }
  return encoder_(input).permute({0, 2, 3, 4, 1});
}

torch::Tensor VideoCodec::decode(const torch::Tensor& embeddings) {
  if (embeddings.dim() != 5 || embeddings.size(4) != config_.embed_dim) {
    throw std::invalid_argument("decode expects B x t x h x w x c with c = " + std::to_string(config_.embed_dim));
  }
  if (embeddings.size(0) == 0) throw std::invalid_argument("decode called with an empty batch");
  return decoder_(embeddings.permute({0, 4, 1, 2, 3}));
}

torch::Tensor VideoCodec::tokenize(const torch::Tensor& clips, const std::optional<TemporalContext>& context) {
  torch::NoGradGuard no_grad;
  const bool was_training = is_training();
  train(false);
  auto tokens = quantize(encode(clips, context)).tokens;
  train(was_training);
  return tokens;
}

torch::Tensor VideoCodec::detokenize(const torch::Tensor& tokens) {
  torch::NoGradGuard no_grad;
  const bool was_training = is_training();
  train(false);
  if ((tokens.min().item<int64_t>() < 0) || tokens.max().item<int64_t>() >= codebook_.size()) {
    throw std::invalid_argument("token id outside the codebook");
  }
  auto emb = codebook_.embeddings.index_select(0, tokens.reshape({-1})).reshape({tokens.size(0), tokens.size(1),
                                                                                   tokens.size(2), tokens.size(3), -1});
  auto out = decode(emb);
  train(was_training);
  return out;
}

void VideoCodec::train(bool on) {
  encoder_->train(on);
  decoder_->train(on);
}

std::vector<torch::Tensor> VideoCodec::parameters() const {
  auto params = encoder_->parameters();
  auto dec = decoder_->parameters();
  params.insert(params.end(), dec.begin(), dec.end());
  return params;
}

void VideoCodec::save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put(prefix + "encoder.", *encoder_);
  ckpt.put(prefix + "decoder.", *decoder_);
  ckpt.tensors[prefix + "codebook.embeddings"] = codebook_.embeddings.clone();
  ckpt.tensors[prefix + "codebook.ema_cluster_size"] = codebook_.ema_cluster_size.clone();
  ckpt.tensors[prefix + "codebook.ema_embed_sum"] = codebook_.ema_embed_sum.clone();
  ckpt.metadata["codec_config"] = to_json(config_);
}

void VideoCodec::load(const Checkpoint& ckpt, const std::string& prefix) {
  ckpt.get(prefix + "encoder.", *encoder_);
  ckpt.get(prefix + "decoder.", *decoder_);
  codebook_.embeddings = ckpt.at(prefix + "codebook.embeddings").clone();
  codebook_.ema_cluster_size = ckpt.at(prefix + "codebook.ema_cluster_size").clone();
  codebook_.ema_embed_sum = ckpt.at(prefix + "codebook.ema_embed_sum").clone();
  codebook_.validate();
}

torch::Tensor encode(VideoCodec& codec, const VideoClip& clip, const std::optional<VideoClip>& before,
                     const std::optional<VideoClip>& after) {
  std::optional<TemporalContext> ctx;
  if (before && after) ctx = TemporalContext{before->channels_first().unsqueeze(0), after->channels_first().unsqueeze(0)};
  return codec.encode(clip.channels_first().unsqueeze(0), ctx).squeeze(0);
}

VideoClip decode(VideoCodec& codec, const torch::Tensor& embeddings) {
  return VideoClip::from_channels_first(codec.decode(embeddings.unsqueeze(0)).squeeze(0).detach());
}

double equivariance_score(VideoCodec& codec, const VideoClip& clip, int64_t window, int64_t shift) {
  const int64_t dt = codec.config().temporal_rate;
  if (shift <= 0 || shift % dt != 0) throw std::invalid_argument("shift must be a positive multiple of d_t");
  if (shift >= window) throw std::invalid_argument("shift must be shorter than the window");
  const bool real = codec.config().padding.mode == PaddingMode::kRealFrame;
  const int64_t ctx = real ? codec.real_frames_required() : 0;
  if (clip.length() < window + shift + 2 * ctx) {
    throw std::invalid_argument("clip too short for equivariance score: need " + std::to_string(window + shift + 2 * ctx) +
                                " frames");
  }
  const auto x = clip.channels_first().unsqueeze(0);
  auto tokens_at = [&](int64_t start) {
    std::optional<TemporalContext> context;
    if (real) context = TemporalContext{x.narrow(2, start - ctx, ctx), x.narrow(2, start + window, ctx)};
    return codec.tokenize(x.narrow(2, start, window), context).squeeze(0);
  };
  const auto first = tokens_at(ctx);
  const auto second = tokens_at(ctx + shift);
  const int64_t slices = shift / dt;
  const int64_t t = first.size(0);
  const auto agree = first.narrow(0, slices, t - slices).eq(second.narrow(0, 0, t - slices));
  return agree.to(torch::kFloat64).mean().item<double>();
}

}  // namespace tats
