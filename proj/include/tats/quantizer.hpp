#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace tats {

// K learnable code vectors trained by exponential moving averages.
struct Codebook {
  torch::Tensor embeddings;        // K x c
  torch::Tensor ema_cluster_size;  // K
  torch::Tensor ema_embed_sum;     // K x c
  double decay = 0.99;
  double epsilon = 1e-5;

  // Gaussian init; EMA accumulators start at one unit of mass per code so
  // that an unassigned code keeps its embedding.
  static Codebook random(int64_t size, int64_t dim, double scale = 1.0, double decay = 0.99, double epsilon = 1e-5);
  // Replaces the embeddings with rows drawn from `features` (N x c).
  void init_from(const torch::Tensor& features, uint64_t seed);

  int64_t size() const { return embeddings.size(0); }
  int64_t dim() const { return embeddings.size(1); }
  void validate() const;
};

struct QuantizeResult {
  torch::Tensor tokens;     // int64, features.shape[:-1]
  // Exact code vectors embeddings[tokens]; carries no gradient.
  torch::Tensor quantized;
  // Same values as `quantized`, with the straight-through gradient: the
  // backward pass hands the incoming gradient to the features unchanged.
  torch::Tensor straight_through;
  // Mean over positions of ||sg[features] - c_z||^2 (logged only).
  torch::Tensor codebook_loss;
  // Mean over positions of ||sg[c_z] - features||^2.
  torch::Tensor commit_loss;
};

// Nearest code by squared Euclidean distance, lowest index on ties.
QuantizeResult quantize(const torch::Tensor& features, const Codebook& codebook);
torch::Tensor nearest_codes(const torch::Tensor& features, const torch::Tensor& embeddings);

// cluster_size <- decay * cluster_size + (1 - decay) * counts
// embed_sum    <- decay * embed_sum    + (1 - decay) * per-code feature sums
// embeddings   <- embed_sum / smoothed(cluster_size), with Laplace smoothing
//                 (cs + eps) / (n + K eps) * n, n = total cluster mass.
void codebook_ema_update(Codebook& codebook, const torch::Tensor& features, const torch::Tensor& assignments);

}  // namespace tats
