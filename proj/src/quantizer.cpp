#include "tats/quantizer.hpp"

#include <stdexcept>

namespace tats {

namespace {

class StraightThrough : public torch::autograd::Function<StraightThrough> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext*, const torch::Tensor& /*features*/,
                               const torch::Tensor& quantized) {
    return quantized.clone();
  }
  static torch::autograd::variable_list backward(torch::autograd::AutogradContext*,
                                                 torch::autograd::variable_list grads) {
    return {grads[0], torch::Tensor()};
  }
};

// Upper bound on doubles materialised per distance block.
constexpr int64_t kBlockElements = 1 << 22;

}  // namespace

Codebook Codebook::random(int64_t size, int64_t dim, double scale, double decay, double epsilon) {
  if (size < 2) throw std::invalid_argument("codebook needs at least two codes");
  if (dim < 1) throw std::invalid_argument("codebook dimension must be positive");
  Codebook cb;
  cb.embeddings = torch::randn({size, dim}, torch::kFloat32) * scale;
  cb.ema_cluster_size = torch::ones({size}, torch::kFloat32);
  cb.ema_embed_sum = cb.embeddings.clone();
  cb.decay = decay;
  cb.epsilon = epsilon;
  return cb;
}

void Codebook::init_from(const torch::Tensor& features, uint64_t seed) {
  auto flat = features.detach().reshape({-1, dim()}).to(torch::kFloat32);
  if (flat.size(0) == 0) throw std::invalid_argument("no features to initialise the codebook from");
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  auto idx = torch::randint(flat.size(0), {size()}, gen, torch::kInt64);
  embeddings = flat.index_select(0, idx).clone();
  ema_cluster_size = torch::ones({size()}, torch::kFloat32);
  ema_embed_sum = embeddings.clone();
}

void Codebook::validate() const {
  if (!embeddings.defined() || embeddings.dim() != 2 || embeddings.size(0) < 2) {
    throw std::invalid_argument("codebook needs a K x c embedding matrix with K >= 2");
  }
  if (!torch::isfinite(embeddings).all().item<bool>()) throw std::invalid_argument("codebook has non-finite rows");
  if ((ema_cluster_size < 0).any().item<bool>()) throw std::invalid_argument("negative EMA cluster size");
  if (!(decay > 0 && decay < 1) || !(epsilon > 0)) throw std::invalid_argument("invalid EMA decay/epsilon");
}

torch::Tensor nearest_codes(const torch::Tensor& features, const torch::Tensor& embeddings) {
  if (embeddings.size(0) == 0) throw std::invalid_argument("empty codebook");
  const int64_t dim = embeddings.size(1);
  if (features.size(-1) != dim) throw std::invalid_argument("feature dimension does not match codebook");
  torch::NoGradGuard no_grad;
  auto flat = features.detach().reshape({-1, dim}).to(torch::kFloat64);
  if (!torch::isfinite(flat).all().item<bool>()) throw std::invalid_argument("non-finite features in quantize");
  auto codes = embeddings.detach().to(torch::kFloat64);
  auto out = torch::empty({flat.size(0)}, torch::kInt64);
  // Direct squared differences (not the |f|^2 - 2 f.c + |c|^2 expansion) so
  // that near-ties resolve exactly like a brute-force scan.
  const int64_t rows_per_chunk = std::max<int64_t>(1, kBlockElements / std::max<int64_t>(1, codes.size(0) * dim));
  for (int64_t start = 0; start < flat.size(0); start += rows_per_chunk) {
    const int64_t n = std::min(rows_per_chunk, flat.size(0) - start);
    auto block = flat.narrow(0, start, n);
    auto dist = (block.unsqueeze(1) - codes.unsqueeze(0)).square().sum(-1);
    out.narrow(0, start, n).copy_(dist.argmin(1));
  }
  auto shape = features.sizes().vec();
  shape.pop_back();
  return out.reshape(shape);
}

QuantizeResult quantize(const torch::Tensor& features, const Codebook& codebook) {
  if (codebook.size() == 0) throw std::invalid_argument("empty codebook");
  QuantizeResult r;
  r.tokens = nearest_codes(features, codebook.embeddings);
  r.quantized = codebook.embeddings.detach().index_select(0, r.tokens.reshape({-1})).reshape(features.sizes()).to(
      features.scalar_type());
  r.straight_through = StraightThrough::apply(features, r.quantized);
  r.codebook_loss = (features.detach() - r.quantized).square().sum(-1).mean();
  r.commit_loss = (r.quantized - features).square().sum(-1).mean();
  return r;
}

void codebook_ema_update(Codebook& codebook, const torch::Tensor& features, const torch::Tensor& assignments) {
  torch::NoGradGuard no_grad;
  const int64_t k = codebook.size();
  auto flat = features.detach().reshape({-1, codebook.dim()}).to(codebook.embeddings.scalar_type());
  auto assign = assignments.reshape({-1}).to(torch::kInt64);
  if (flat.size(0) != assign.size(0)) throw std::invalid_argument("features and assignments differ in batch size");
  if (assign.numel() > 0 && (assign.min().item<int64_t>() < 0 || assign.max().item<int64_t>() >= k)) {
    throw std::invalid_argument("assignment index outside the codebook");
  }
  auto counts = torch::zeros({k}, flat.options()).index_add_(0, assign, torch::ones({assign.size(0)}, flat.options()));
  auto sums = torch::zeros({k, codebook.dim()}, flat.options()).index_add_(0, assign, flat);

  const double d = codebook.decay;
  codebook.ema_cluster_size.mul_(d).add_(counts, 1.0 - d);
  codebook.ema_embed_sum.mul_(d).add_(sums, 1.0 - d);
  auto n = codebook.ema_cluster_size.sum();
  auto smoothed = (codebook.ema_cluster_size + codebook.epsilon) / (n + static_cast<double>(k) * codebook.epsilon) * n;
  codebook.embeddings = codebook.ema_embed_sum / smoothed.unsqueeze(1);
}

}  // namespace tats
