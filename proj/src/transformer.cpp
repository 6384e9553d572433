#include "tats/transformer.hpp"

#include "tats/checkpoint.hpp"
#include "tats/error.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tats {

void TransformerConfig::validate() const {
  if (n_layers < 0) throw ConfigError("prior.n_layers must be >= 0");
  if (n_heads < 1 || embed_dim < 1 || embed_dim % n_heads != 0) {
    throw ConfigError("prior.embed_dim must be a positive multiple of prior.n_heads");
  }
  if (max_positions < 1) throw ConfigError("prior.max_positions must be >= 1");
  if (vocab < 1) throw ConfigError("prior.vocab must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ConfigError("prior.dropout must be in [0, 1)");
}

Json to_json(const TransformerConfig& c) {
  return Json{{"n_layers", c.n_layers},          {"n_heads", c.n_heads}, {"embed_dim", c.embed_dim},
              {"max_positions", c.max_positions}, {"vocab", c.vocab},     {"dropout", c.dropout}};
}

TransformerConfig transformer_config_from_json(const Json& j) {
  TransformerConfig c;
  StrictReader r(j, "transformer");
  r.read("n_layers", c.n_layers)
      .read("n_heads", c.n_heads)
      .read("embed_dim", c.embed_dim)
      .read("max_positions", c.max_positions)
      .read("vocab", c.vocab)
      .read("dropout", c.dropout);
  r.finish();
  return c;
}

SelfAttentionImpl::SelfAttentionImpl(int64_t embed_dim, int64_t n_heads, double dropout) : n_heads_(n_heads) {
  qkv_ = register_module("qkv", torch::nn::Linear(embed_dim, 3 * embed_dim));
  proj_ = register_module("proj", torch::nn::Linear(embed_dim, embed_dim));
  drop_ = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor SelfAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& allowed) {
  const int64_t b = x.size(0), l = x.size(1), d = x.size(2);
  const int64_t hd = d / n_heads_;
  auto qkv = qkv_->forward(x).view({b, l, 3, n_heads_, hd}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0], k = qkv[1], v = qkv[2];
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));
  scores = scores.masked_fill(allowed.logical_not(), -std::numeric_limits<double>::infinity());
  auto att = drop_->forward(torch::softmax(scores, -1));
  auto y = torch::matmul(att, v).transpose(1, 2).reshape({b, l, d});
  return proj_->forward(y);
}

BlockImpl::BlockImpl(int64_t embed_dim, int64_t n_heads, double dropout) {
  ln1_ = register_module("ln1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({embed_dim})));
  ln2_ = register_module("ln2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({embed_dim})));
  attn_ = register_module("attn", SelfAttention(embed_dim, n_heads, dropout));
  mlp_ = register_module("mlp", torch::nn::Sequential(torch::nn::Linear(embed_dim, 4 * embed_dim),
                                                      torch::nn::GELU(),
                                                      torch::nn::Linear(4 * embed_dim, embed_dim),
                                                      torch::nn::Dropout(dropout)));
}

torch::Tensor BlockImpl::forward(const torch::Tensor& x, const torch::Tensor& allowed) {
  auto h = x + attn_->forward(ln1_->forward(x), allowed);
  return h + mlp_->forward(ln2_->forward(h));
}

TransformerImpl::TransformerImpl(const TransformerConfig& config) : config_(config) {
  config_.validate();
  const auto d = config_.embed_dim;
  tok_emb_ = register_module("tok_emb", torch::nn::Embedding(config_.vocab, d));
  pos_emb_ = register_module("pos_emb", torch::nn::Embedding(config_.max_positions, d));
  drop_ = register_module("drop", torch::nn::Dropout(config_.dropout));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < config_.n_layers; ++i) blocks_->push_back(Block(d, config_.n_heads, config_.dropout));
  ln_f_ = register_module("ln_f", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  head_ = register_module("head", torch::nn::Linear(torch::nn::LinearOptions(d, config_.vocab).bias(false)));

  torch::NoGradGuard no_grad;
  for (auto& p : named_parameters()) {
    if (p.key().find("ln") != std::string::npos) continue;
    if (p.value().dim() >= 2) {
      torch::nn::init::normal_(p.value(), 0.0, 0.02);
    } else {
      p.value().zero_();
    }
  }
}

torch::Tensor TransformerImpl::embed(const torch::Tensor& ids) {
  if (ids.dim() != 2) throw std::invalid_argument("transformer expects B x L ids");
  if (ids.numel() > 0 && (ids.min().item<int64_t>() < 0 || ids.max().item<int64_t>() >= config_.vocab)) {
    throw std::out_of_range("token id outside the prior vocabulary");
  }
  return tok_emb_->forward(ids);
}

torch::Tensor TransformerImpl::forward(const torch::Tensor& ids, const AttentionLayout& layout) {
  return forward_embeddings(embed(ids), layout);
}

torch::Tensor TransformerImpl::forward_embeddings(const torch::Tensor& token_embeddings,
                                                  const AttentionLayout& layout) {
  const int64_t l = token_embeddings.size(1);
  if (l > config_.max_positions) {
    throw std::length_error("sequence of " + std::to_string(l) + " tokens exceeds max_positions " +
                            std::to_string(config_.max_positions));
  }
  if (layout.n_positions != l) throw std::invalid_argument("attention layout size does not match the sequence");
  auto x = token_embeddings;
  if (config_.n_layers > 0) {
    auto pos = torch::arange(l, torch::TensorOptions().dtype(torch::kInt64).device(x.device()));
    x = drop_->forward(x + pos_emb_->forward(pos).unsqueeze(0));
  }
  const auto allowed = layout.allowed.to(x.device());
  for (auto& block : *blocks_) x = block->as<Block>()->forward(x, allowed);
  return head_->forward(ln_f_->forward(x));
}

void TransformerImpl::save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put(prefix, *this);
  ckpt.metadata[prefix + "config"] = to_json(config_);
}

void TransformerImpl::load(const Checkpoint& ckpt, const std::string& prefix) { ckpt.get(prefix, *this); }

torch::Tensor nll_loss(const torch::Tensor& logits, const torch::Tensor& targets,
                       const std::vector<int64_t>& loss_positions, int64_t target_shift) {
  if (loss_positions.empty()) throw std::invalid_argument("nll_loss needs at least one loss position");
  if (logits.dim() != 3 || targets.dim() != 2) throw std::invalid_argument("nll_loss expects B x L x V logits");
  std::vector<int64_t> from, to;
  for (auto p : loss_positions) {
    if (p - target_shift < 0 || p >= targets.size(1)) throw std::out_of_range("loss position outside sequence");
    from.push_back(p - target_shift);
    to.push_back(p);
  }
  auto idx_from = torch::tensor(from, torch::TensorOptions().dtype(torch::kInt64).device(logits.device()));
  auto idx_to = torch::tensor(to, torch::TensorOptions().dtype(torch::kInt64).device(logits.device()));
  auto sel = logits.index_select(1, idx_from);
  auto tgt = targets.index_select(1, idx_to);
  return torch::nn::functional::cross_entropy(sel.reshape({-1, sel.size(2)}), tgt.reshape({-1}));
}

torch::Tensor nll_loss(const torch::Tensor& logits, const torch::Tensor& targets, const AttentionLayout& layout) {
  return nll_loss(logits, targets, layout.loss_positions, layout.target_shift);
}

torch::Tensor TransformerPredictor::predict(const torch::Tensor& ids, const AttentionLayout& layout,
                                            int64_t position) {
  torch::NoGradGuard no_grad;
  const bool was_training = model_->is_training();
  model_->eval();
  auto logits = model_->forward(ids, layout).select(1, position).to(torch::kFloat64);
  if (was_training) model_->train();
  return logits;
}

}  // namespace tats
