#pragma once

#include "tats/discriminator.hpp"

#include <torch/torch.h>

#include <memory>
#include <vector>

namespace tats {

struct GanLosses {
  // log D(x) + log(1 - D(x_hat)), averaged over score-map elements. The
  // discriminators maximise these.
  torch::Tensor disc_spatial;
  torch::Tensor disc_temporal;
  // Non-saturating generator terms -log D(x_hat).
  torch::Tensor gen_spatial;
  torch::Tensor gen_temporal;

  torch::Tensor disc_total() const { return disc_spatial + disc_temporal; }
  torch::Tensor gen_total() const { return gen_spatial + gen_temporal; }
};

// L_disc and the generator term from raw logits, via log-sigmoid identities.
torch::Tensor disc_objective(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
torch::Tensor generator_gan_term(const torch::Tensor& fake_logits);

// Both discriminators on real/fake B x C x T x H x W clips. The spatial one
// sees the frames listed in `frame_indices` (B * k entries) of each clip.
GanLosses gan_losses(const torch::Tensor& real, const torch::Tensor& fake, DiscriminatorPair& discs,
                     const torch::Tensor& frame_indices);

// sum_i p_i || fake_i - real_i ||_1 with p_i = 1 / numel(layer i).
torch::Tensor feature_matching(const std::vector<torch::Tensor>& real_features,
                               const std::vector<torch::Tensor>& fake_features);
torch::Tensor feature_matching_loss(const torch::Tensor& real, const torch::Tensor& fake, DiscriminatorPair& discs,
                                    const torch::Tensor& frame_indices);

// Layer-indexed feature network for the perceptual term.
class LayerFeatureNet {
 public:
  virtual ~LayerFeatureNet() = default;
  virtual std::vector<torch::Tensor> features(const torch::Tensor& clips) = 0;
  // Per-layer weights; empty means 1 / numel per layer.
  virtual std::vector<double> layer_weights() const { return {}; }
};

// Fixed random-weight 3D conv stack; a deterministic stand-in feature network.
class RandomConvFeatures : public LayerFeatureNet {
 public:
  RandomConvFeatures(int64_t in_channels, int64_t width, int64_t n_layers, uint64_t seed);
  std::vector<torch::Tensor> features(const torch::Tensor& clips) override;
  void to(torch::Dtype dtype);

 private:
  std::vector<torch::nn::Conv3d> layers_;
};

// Returns 0 (and warns once) when `extractor` is null.
torch::Tensor perceptual_loss(const torch::Tensor& real, const torch::Tensor& fake, LayerFeatureNet* extractor);

}  // namespace tats
