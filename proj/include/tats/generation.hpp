#pragma once

#include "tats/sampler.hpp"
#include "tats/tokens.hpp"
#include "tats/transformer.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <random>
#include <vector>

namespace tats {

struct GenerationPlan {
  int64_t train_slices = 4;   // t: slices the prior saw per training sequence
  int64_t target_slices = 4;
  bool hierarchical = false;
  int64_t anchor_interval = 4;  // s
  // B x P prefix ids (condition tokens, or a single SOS column).
  torch::Tensor prefix;

  void validate() const;
};

struct TokenShape {
  int64_t slice_h = 1;
  int64_t slice_w = 1;
  TokenVocab vocab;

  int64_t slice_len() const { return slice_h * slice_w; }
};

// B x 1 column of SOS ids.
torch::Tensor sos_prefix(const TokenVocab& vocab, int64_t batch);
// B x 1 column of class-condition ids.
torch::Tensor class_prefix(const TokenVocab& vocab, const std::vector<int64_t>& classes);
// Condition ids in [0, n_cond) (B x P) mapped into the shared vocabulary.
torch::Tensor condition_prefix(const TokenVocab& vocab, const torch::Tensor& condition_ids);

// Samples n_slices slices after the prefix: B x n_slices x h x w. Only
// codebook ids [0, K) are ever emitted.
torch::Tensor generate(TokenPredictor& prior, const torch::Tensor& prefix, int64_t n_slices, const TokenShape& shape,
                       const SamplerConfig& sampler, std::vector<std::mt19937_64>& rngs);

// First train_slices slices via generate, then one slice at a time from a
// window of [prefix | previous t-1 slices], re-indexed from position 0.
torch::Tensor generate_long(TokenPredictor& prior, const GenerationPlan& plan, const TokenShape& shape,
                            const SamplerConfig& sampler, std::vector<std::mt19937_64>& rngs);

// Fills n_middle slices between two anchor slices (B x h x w each) with an
// interpolation-layout prior. Returns B x n_middle x h x w.
torch::Tensor fill_middles(TokenPredictor& interp, const torch::Tensor& prefix, const torch::Tensor& front,
                           const torch::Tensor& back, int64_t n_middle, const TokenShape& shape,
                           const SamplerConfig& sampler, std::vector<std::mt19937_64>& rngs);

struct HierarchicalResult {
  torch::Tensor tokens;   // B x target_slices x h x w
  torch::Tensor anchors;  // B x (target/s + 1) x h x w
};

// Anchors from the sparse AR prior (target/s + 1 of them, sliding when
// needed), then s-1 interpolated slices per adjacent pair. Output slice i*s
// is anchor i; the final anchor only serves as the last gap's right end.
HierarchicalResult generate_hierarchical(const GenerationPlan& plan, TokenPredictor& ar_prior,
                                         TokenPredictor& interp_prior, const TokenShape& shape,
                                         const SamplerConfig& ar_sampler, const SamplerConfig& interp_sampler,
                                         std::vector<std::mt19937_64>& rngs);

}  // namespace tats
