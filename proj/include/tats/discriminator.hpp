#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace tats {

struct Checkpoint;

struct DiscOutput {
  std::vector<torch::Tensor> features;  // hidden activations, input-to-output order
  torch::Tensor logits;                 // patch score map
};

struct DiscriminatorConfig {
  int64_t in_channels = 1;
  int64_t base_channels = 16;
};

// 4-layer 2D conv patch classifier over single frames (N x C x H x W).
class SpatialDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit SpatialDiscriminatorImpl(const DiscriminatorConfig& config);
  DiscOutput forward(const torch::Tensor& frames);

 private:
  std::vector<torch::nn::Conv2d> layers_;
};
TORCH_MODULE(SpatialDiscriminator);

// 4-layer 3D conv patch classifier over whole clips (B x C x T x H x W).
class TemporalDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit TemporalDiscriminatorImpl(const DiscriminatorConfig& config);
  DiscOutput forward(const torch::Tensor& clips);

 private:
  std::vector<torch::nn::Conv3d> layers_;
};
TORCH_MODULE(TemporalDiscriminator);

struct DiscriminatorPair {
  explicit DiscriminatorPair(const DiscriminatorConfig& config);

  SpatialDiscriminator spatial;
  TemporalDiscriminator temporal;

  std::vector<torch::Tensor> parameters() const;
  void set_requires_grad(bool on);
  void to(torch::Dtype dtype);
  void save(Checkpoint& ckpt, const std::string& prefix = "disc.") const;
  void load(const Checkpoint& ckpt, const std::string& prefix = "disc.");
};

// Frames picked per clip: indices has B * k entries, entry j belongs to clip j / k.
torch::Tensor select_frames(const torch::Tensor& clips, const torch::Tensor& indices);

}  // namespace tats
