#pragma once

#include "tats/attention.hpp"
#include "tats/json_util.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <string>

namespace tats {

struct Checkpoint;

struct TransformerConfig {
  int64_t n_layers = 4;
  int64_t n_heads = 4;
  int64_t embed_dim = 128;
  int64_t max_positions = 256;
  int64_t vocab = 0;
  double dropout = 0.0;

  void validate() const;
};

Json to_json(const TransformerConfig& config);
TransformerConfig transformer_config_from_json(const Json& j);

class SelfAttentionImpl : public torch::nn::Module {
 public:
  SelfAttentionImpl(int64_t embed_dim, int64_t n_heads, double dropout);
  // x: B x L x D, allowed: L x L bool.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& allowed);

 private:
  int64_t n_heads_;
  torch::nn::Linear qkv_{nullptr};
  torch::nn::Linear proj_{nullptr};
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(SelfAttention);

class BlockImpl : public torch::nn::Module {
 public:
  BlockImpl(int64_t embed_dim, int64_t n_heads, double dropout);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& allowed);

 private:
  torch::nn::LayerNorm ln1_{nullptr};
  torch::nn::LayerNorm ln2_{nullptr};
  SelfAttention attn_{nullptr};
  torch::nn::Sequential mlp_{nullptr};
};
TORCH_MODULE(Block);

// Pre-LN GPT with learned absolute positions. A zero-layer model skips the
// position table so its logits depend on the token alone.
class TransformerImpl : public torch::nn::Module {
 public:
  explicit TransformerImpl(const TransformerConfig& config);

  // ids: B x L int64 -> logits B x L x vocab.
  torch::Tensor forward(const torch::Tensor& ids, const AttentionLayout& layout);
  // Same, starting from token embeddings (B x L x D) so tests can perturb them.
  torch::Tensor forward_embeddings(const torch::Tensor& token_embeddings, const AttentionLayout& layout);
  torch::Tensor embed(const torch::Tensor& ids);

  const TransformerConfig& config() const { return config_; }

  void save(Checkpoint& ckpt, const std::string& prefix = "prior.") const;
  void load(const Checkpoint& ckpt, const std::string& prefix = "prior.");

 private:
  TransformerConfig config_;
  torch::nn::Embedding tok_emb_{nullptr};
  torch::nn::Embedding pos_emb_{nullptr};
  torch::nn::Dropout drop_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::LayerNorm ln_f_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(Transformer);

// Mean cross-entropy over `loss_positions`; logits at p - target_shift are
// scored against targets[:, p]. logits: B x L x V, targets: B x L.
torch::Tensor nll_loss(const torch::Tensor& logits, const torch::Tensor& targets,
                       const std::vector<int64_t>& loss_positions, int64_t target_shift);
torch::Tensor nll_loss(const torch::Tensor& logits, const torch::Tensor& targets, const AttentionLayout& layout);

// Anything that can score a partial sequence. Generation only talks to this
// interface, so tabular priors can stand in for a transformer.
class TokenPredictor {
 public:
  virtual ~TokenPredictor() = default;
  // Logits (B x V, float64) for the distribution of the token predicted from
  // `position` under `layout`; ids is B x layout.n_positions.
  virtual torch::Tensor predict(const torch::Tensor& ids, const AttentionLayout& layout, int64_t position) = 0;
  virtual int64_t vocab_size() const = 0;
  virtual int64_t max_positions() const = 0;
};

class TransformerPredictor : public TokenPredictor {
 public:
  explicit TransformerPredictor(Transformer model) : model_(std::move(model)) {}
  torch::Tensor predict(const torch::Tensor& ids, const AttentionLayout& layout, int64_t position) override;
  int64_t vocab_size() const override { return model_->config().vocab; }
  int64_t max_positions() const override { return model_->config().max_positions; }

 private:
  Transformer model_;
};

}  // namespace tats
