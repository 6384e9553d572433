#include "tats/generation.hpp"

#include "tats/attention.hpp"
#include "tats/error.hpp"

#include <stdexcept>

namespace tats {

void GenerationPlan::validate() const {
  if (train_slices < 1) throw ConfigError("generation.train_slices must be >= 1");
  if (target_slices < train_slices) throw ConfigError("generation.target_slices must be >= train_slices");
  if (anchor_interval < 1 || (hierarchical && anchor_interval < 2)) {
    throw ConfigError("generation.anchor_interval must be >= 2 for hierarchical generation");
  }
  if (!prefix.defined() || prefix.dim() != 2 || prefix.size(1) < 1) {
    throw ConfigError("generation prefix must be B x P with P >= 1");
  }
}

torch::Tensor sos_prefix(const TokenVocab& vocab, int64_t batch) {
  return torch::full({batch, 1}, vocab.sos_id(), torch::kInt64);
}

torch::Tensor class_prefix(const TokenVocab& vocab, const std::vector<int64_t>& classes) {
  std::vector<int64_t> ids;
  for (auto c : classes) ids.push_back(vocab.condition_id(c));
  return torch::tensor(ids, torch::kInt64).unsqueeze(1);
}

torch::Tensor condition_prefix(const TokenVocab& vocab, const torch::Tensor& condition_ids) {
  if (condition_ids.dim() != 2) throw std::invalid_argument("condition ids must be B x P");
  auto ids = condition_ids.to(torch::kInt64);
  if (ids.numel() > 0 && (ids.min().item<int64_t>() < 0 || ids.max().item<int64_t>() >= vocab.n_cond)) {
    throw std::out_of_range("condition id outside [0, n_cond)");
  }
  return ids + vocab.codebook_size;
}

namespace {

void check_prior(TokenPredictor& prior, const TokenShape& shape) {
  if (prior.vocab_size() != shape.vocab.size()) {
    throw std::invalid_argument("prior vocabulary " + std::to_string(prior.vocab_size()) +
                                " does not match codec vocabulary " + std::to_string(shape.vocab.size()));
  }
}

void check_rngs(const std::vector<std::mt19937_64>& rngs, int64_t batch) {
  if (static_cast<int64_t>(rngs.size()) != batch) throw std::invalid_argument("need one rng stream per sequence");
}

// Samples one codebook id per row from the predicted logits.
torch::Tensor sample_rows(const torch::Tensor& logits, int64_t codebook_size, const SamplerConfig& sampler,
                          std::vector<std::mt19937_64>& rngs) {
  auto lg = logits.to(torch::kCPU, torch::kFloat64).contiguous();
  const int64_t b = lg.size(0);
  auto out = torch::empty({b}, torch::kInt64);
  const double* data = lg.data_ptr<double>();
  for (int64_t r = 0; r < b; ++r) {
    std::vector<double> row(data + r * lg.size(1), data + r * lg.size(1) + codebook_size);
    out[r] = sample_next(row, sampler, rngs[static_cast<size_t>(r)]);
  }
  return out;
}

// Appends `n_tokens` sampled ids to `ids` (B x L) under a causal layout.
torch::Tensor extend_causal(TokenPredictor& prior, torch::Tensor ids, int64_t n_prefix, int64_t n_tokens,
                            const TokenShape& shape, const SamplerConfig& sampler,
                            std::vector<std::mt19937_64>& rngs) {
  for (int64_t i = 0; i < n_tokens; ++i) {
    const int64_t len = ids.size(1);
    if (len > prior.max_positions()) {
      throw std::length_error("generation window of " + std::to_string(len) + " tokens exceeds max_positions");
    }
    auto logits = prior.predict(ids, causal_layout(len, n_prefix), len - 1);
    auto next = sample_rows(logits, shape.vocab.codebook_size, sampler, rngs);
    ids = torch::cat({ids, next.unsqueeze(1)}, 1);
  }
  return ids;
}

}  // namespace

torch::Tensor generate(TokenPredictor& prior, const torch::Tensor& prefix, int64_t n_slices, const TokenShape& shape,
                       const SamplerConfig& sampler, std::vector<std::mt19937_64>& rngs) {
  check_prior(prior, shape);
  check_rngs(rngs, prefix.size(0));
  const int64_t p = prefix.size(1);
  if (p + n_slices * shape.slice_len() - 1 > prior.max_positions()) {
    throw std::length_error("requested sequence exceeds the prior's max_positions");
  }
  auto ids = extend_causal(prior, prefix.to(torch::kInt64), p, n_slices * shape.slice_len(), shape, sampler, rngs);
  return unflatten_batch(ids.narrow(1, p, ids.size(1) - p), shape.slice_h, shape.slice_w);
}

torch::Tensor generate_long(TokenPredictor& prior, const GenerationPlan& plan, const TokenShape& shape,
                            const SamplerConfig& sampler, std::vector<std::mt19937_64>& rngs) {
  plan.validate();
  const auto& prefix = plan.prefix;
  const int64_t t = plan.train_slices;
  const int64_t p = prefix.size(1);
  const int64_t s = shape.slice_len();
  auto slices = generate(prior, prefix, t, shape, sampler, rngs).reshape({prefix.size(0), -1});
  for (int64_t j = t; j < plan.target_slices; ++j) {
    auto context = slices.narrow(1, (j - (t - 1)) * s, (t - 1) * s);
    auto window = torch::cat({prefix.to(torch::kInt64), context}, 1);
    auto out = extend_causal(prior, window, p, s, shape, sampler, rngs);
    slices = torch::cat({slices, out.narrow(1, out.size(1) - s, s)}, 1);
  }
  return unflatten_batch(slices, shape.slice_h, shape.slice_w);
}

torch::Tensor fill_middles(TokenPredictor& interp, const torch::Tensor& prefix, const torch::Tensor& front,
                           const torch::Tensor& back, int64_t n_middle, const TokenShape& shape,
                           const SamplerConfig& sampler, std::vector<std::mt19937_64>& rngs) {
  check_prior(interp, shape);
  const int64_t b = front.size(0);
  check_rngs(rngs, b);
  const int64_t s = shape.slice_len();
  const int64_t p = prefix.size(1);
  const int64_t m = n_middle * s;
  auto layout = interpolation_layout(s, n_middle, p);
  if (layout.n_positions > interp.max_positions()) throw std::length_error("interpolation sequence too long");

  // Middle inputs are the targets shifted right by one, led by SOS.
  auto middle_in = torch::full({b, m}, shape.vocab.sos_id(), torch::kInt64);
  auto middle_out = torch::empty({b, m}, torch::kInt64);
  const int64_t mid_start = p + s;
  for (int64_t j = 0; j < m; ++j) {
    auto ids = torch::cat({prefix.to(torch::kInt64), front.reshape({b, s}).to(torch::kInt64), middle_in,
                           back.reshape({b, s}).to(torch::kInt64)},
                          1);
    auto logits = interp.predict(ids, layout, mid_start + j);
    auto next = sample_rows(logits, shape.vocab.codebook_size, sampler, rngs);
    middle_out.select(1, j).copy_(next);
    if (j + 1 < m) middle_in.select(1, j + 1).copy_(next);
  }
  return unflatten_batch(middle_out, shape.slice_h, shape.slice_w);
}

HierarchicalResult generate_hierarchical(const GenerationPlan& plan, TokenPredictor& ar_prior,
                                         TokenPredictor& interp_prior, const TokenShape& shape,
                                         const SamplerConfig& ar_sampler, const SamplerConfig& interp_sampler,
                                         std::vector<std::mt19937_64>& rngs) {
  if (!plan.prefix.defined()) throw ConfigError("generation prefix missing");
  const int64_t s = plan.anchor_interval;
  if (s < 1) throw ConfigError("anchor_interval must be >= 1");
  if (plan.target_slices % s != 0) {
    throw ConfigError("target_slices " + std::to_string(plan.target_slices) + " is not a multiple of anchor_interval " +
                      std::to_string(s));
  }
  const int64_t n_anchors = plan.target_slices / s + 1;
  GenerationPlan anchor_plan = plan;
  anchor_plan.hierarchical = false;
  anchor_plan.target_slices = std::max(n_anchors, plan.train_slices);
  auto anchors = generate_long(ar_prior, anchor_plan, shape, ar_sampler, rngs).narrow(1, 0, n_anchors);

  std::vector<torch::Tensor> parts;
  for (int64_t i = 0; i + 1 < n_anchors; ++i) {
    parts.push_back(anchors.narrow(1, i, 1));
    if (s > 1) {
      parts.push_back(fill_middles(interp_prior, plan.prefix, anchors.select(1, i), anchors.select(1, i + 1), s - 1,
                                   shape, interp_sampler, rngs));
    }
  }
  return HierarchicalResult{torch::cat(parts, 1), anchors};
}

}  // namespace tats
