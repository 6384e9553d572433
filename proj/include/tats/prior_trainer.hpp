#pragma once

#include "tats/attention.hpp"
#include "tats/json_util.hpp"
#include "tats/optim.hpp"
#include "tats/tokens.hpp"
#include "tats/transformer.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tats {

enum class PriorKind { kAr, kArSparse, kInterp };

std::string to_string(PriorKind kind);
PriorKind parse_prior_kind(const std::string& name);

struct PriorTrainConfig {
  int64_t steps = 2000;
  int64_t batch_size = 16;
  AdamConfig optim{3e-4, 0.9, 0.95, 1e-8, 0.01};
  double clip_norm = 1.0;
  uint64_t seed = 0;

  void validate() const;
};

Json to_json(const PriorTrainConfig& config);
PriorTrainConfig prior_train_config_from_json(const Json& j);

struct PriorBatch {
  torch::Tensor ids;      // B x L model inputs
  torch::Tensor targets;  // B x L, read only at layout.loss_positions
  AttentionLayout layout;
};

// [prefix | flattened slices]; next-token targets.
PriorBatch causal_batch(const torch::Tensor& grids, const torch::Tensor& prefix);
// grids: B x (n_middle + 2) x h x w. Inputs [prefix | first | SOS, m0 .. m_{M-2} | last],
// targets m_j at the middle positions.
PriorBatch interpolation_batch(const torch::Tensor& grids, const torch::Tensor& prefix, const TokenVocab& vocab);

// Every s-th slice: N x ceil(T / s) x h x w.
torch::Tensor sparse_slices(const torch::Tensor& grids, int64_t stride);

// Token grids of a corpus (N x T x h x w) with optional class labels.
struct TokenCorpus {
  torch::Tensor grids;
  std::vector<int64_t> labels;  // empty when unlabelled
};

// Random windows of `window` consecutive slices; prefix is the class id when
// `conditional`, SOS otherwise.
PriorBatch sample_prior_batch(PriorKind kind, const TokenCorpus& corpus, int64_t window, int64_t batch,
                              const TokenVocab& vocab, bool conditional, std::mt19937_64& rng);

class PriorTrainer {
 public:
  PriorTrainer(Transformer model, const PriorTrainConfig& config);

  // One optimizer step; returns the batch NLL before the update.
  double step(const PriorBatch& batch);
  double evaluate(const PriorBatch& batch);

  int64_t current_step() const { return step_; }
  Transformer& model() { return model_; }
  Adam& optimizer() { return opt_; }

 private:
  Transformer model_;
  PriorTrainConfig config_;
  Adam opt_;
  int64_t step_ = 0;
};

}  // namespace tats
