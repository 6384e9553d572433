#include "tats/discriminator.hpp"

#include "tats/checkpoint.hpp"

#include <stdexcept>

namespace tats {

SpatialDiscriminatorImpl::SpatialDiscriminatorImpl(const DiscriminatorConfig& config) {
  const int64_t c = config.base_channels;
  const std::vector<std::tuple<int64_t, int64_t, int64_t, int64_t>> spec = {
      {config.in_channels, c, 4, 2}, {c, 2 * c, 4, 2}, {2 * c, 4 * c, 3, 1}, {4 * c, 1, 3, 1}};
  for (const auto& [in, out, k, s] : spec) {
    layers_.push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).stride(s).padding(1)));
    register_module("conv" + std::to_string(layers_.size() - 1), layers_.back());
  }
}

DiscOutput SpatialDiscriminatorImpl::forward(const torch::Tensor& frames) {
  DiscOutput out;
  auto h = frames;
  for (size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = torch::leaky_relu(layers_[i](h), 0.2);
    out.features.push_back(h);
  }
  out.logits = layers_.back()(h);
  return out;
}

TemporalDiscriminatorImpl::TemporalDiscriminatorImpl(const DiscriminatorConfig& config) {
  const int64_t c = config.base_channels;
  const std::vector<std::tuple<int64_t, int64_t, int64_t, int64_t>> spec = {
      {config.in_channels, c, 4, 2}, {c, 2 * c, 4, 2}, {2 * c, 4 * c, 3, 1}, {4 * c, 1, 3, 1}};
  for (const auto& [in, out, k, s] : spec) {
    layers_.push_back(torch::nn::Conv3d(torch::nn::Conv3dOptions(in, out, k).stride(s).padding(1)));
    register_module("conv" + std::to_string(layers_.size() - 1), layers_.back());
  }
}

DiscOutput TemporalDiscriminatorImpl::forward(const torch::Tensor& clips) {
  DiscOutput out;
  auto h = clips;
  for (size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = torch::leaky_relu(layers_[i](h), 0.2);
    out.features.push_back(h);
  }
  out.logits = layers_.back()(h);
  return out;
}

DiscriminatorPair::DiscriminatorPair(const DiscriminatorConfig& config) : spatial(config), temporal(config) {}

std::vector<torch::Tensor> DiscriminatorPair::parameters() const {
  auto p = spatial->parameters();
  auto t = temporal->parameters();
  p.insert(p.end(), t.begin(), t.end());
  return p;
}

void DiscriminatorPair::set_requires_grad(bool on) {
  for (auto& p : parameters()) p.set_requires_grad(on);
}

void DiscriminatorPair::to(torch::Dtype dtype) {
  spatial->to(dtype);
  temporal->to(dtype);
}

void DiscriminatorPair::save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put(prefix + "spatial.", *spatial);
  ckpt.put(prefix + "temporal.", *temporal);
}

void DiscriminatorPair::load(const Checkpoint& ckpt, const std::string& prefix) {
  ckpt.get(prefix + "spatial.", *spatial);
  ckpt.get(prefix + "temporal.", *temporal);
}

torch::Tensor select_frames(const torch::Tensor& clips, const torch::Tensor& indices) {
  if (clips.dim() != 5) throw std::invalid_argument("select_frames expects B x C x T x H x W");
  const int64_t b = clips.size(0);
  if (b == 0 || indices.numel() % b != 0) throw std::invalid_argument("indices must hold k entries per clip");
  const int64_t k = indices.numel() / b;
  auto clip_idx = torch::arange(b, torch::kInt64).repeat_interleave(k);
  auto frames = clips.permute({0, 2, 1, 3, 4});  // B x T x C x H x W
  return frames.index({clip_idx, indices.reshape({-1}).to(torch::kInt64)});
}

}  // namespace tats
