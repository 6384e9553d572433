#include "tats/losses.hpp"

#include "tats/error.hpp"

#include <iostream>
#include <sstream>

namespace tats {

namespace {

void check_finite(const torch::Tensor& logits, const char* which) {
  if (!torch::isfinite(logits).all().item<bool>()) {
    std::ostringstream msg;
    msg << "non-finite " << which << " discriminator logits (nan: " << torch::isnan(logits).sum().item<int64_t>()
        << ", inf: " << torch::isinf(logits).sum().item<int64_t>() << " of " << logits.numel() << ")";
    throw DivergenceError(msg.str());
  }
}

}  // namespace

torch::Tensor disc_objective(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  // log sigmoid(l) = -softplus(-l); log(1 - sigmoid(l)) = -softplus(l)
  return -torch::softplus(-real_logits).mean() - torch::softplus(fake_logits).mean();
}

torch::Tensor generator_gan_term(const torch::Tensor& fake_logits) { return torch::softplus(-fake_logits).mean(); }

GanLosses gan_losses(const torch::Tensor& real, const torch::Tensor& fake, DiscriminatorPair& discs,
                     const torch::Tensor& frame_indices) {
  if (real.sizes() != fake.sizes()) throw std::invalid_argument("real and fake clips differ in shape");
  const auto real_s = discs.spatial(select_frames(real, frame_indices)).logits;
  const auto fake_s = discs.spatial(select_frames(fake, frame_indices)).logits;
  const auto real_t = discs.temporal(real).logits;
  const auto fake_t = discs.temporal(fake).logits;
  check_finite(real_s, "spatial(real)");
  check_finite(fake_s, "spatial(fake)");
  check_finite(real_t, "temporal(real)");
  check_finite(fake_t, "temporal(fake)");
  GanLosses out;
  out.disc_spatial = disc_objective(real_s, fake_s);
  out.disc_temporal = disc_objective(real_t, fake_t);
  out.gen_spatial = generator_gan_term(fake_s);
  out.gen_temporal = generator_gan_term(fake_t);
  return out;
}

torch::Tensor feature_matching(const std::vector<torch::Tensor>& real_features,
                               const std::vector<torch::Tensor>& fake_features) {
  if (real_features.size() != fake_features.size()) throw std::invalid_argument("feature layer counts differ");
  torch::Tensor total;
  for (size_t i = 0; i < real_features.size(); ++i) {
    if (real_features[i].sizes() != fake_features[i].sizes()) throw std::invalid_argument("feature shapes differ");
    auto term = (fake_features[i] - real_features[i]).abs().sum() / static_cast<double>(real_features[i].numel());
    total = total.defined() ? total + term : term;
  }
  return total.defined() ? total : torch::zeros({});
}

torch::Tensor feature_matching_loss(const torch::Tensor& real, const torch::Tensor& fake, DiscriminatorPair& discs,
                                    const torch::Tensor& frame_indices) {
  if (real.sizes() != fake.sizes()) throw std::invalid_argument("real and fake clips differ in shape");
  std::vector<torch::Tensor> real_s;
  std::vector<torch::Tensor> real_t;
  {
    torch::NoGradGuard no_grad;
    real_s = discs.spatial(select_frames(real, frame_indices)).features;
    real_t = discs.temporal(real).features;
  }
  const auto fake_s = discs.spatial(select_frames(fake, frame_indices)).features;
  const auto fake_t = discs.temporal(fake).features;
  return feature_matching(real_s, fake_s) + feature_matching(real_t, fake_t);
}

RandomConvFeatures::RandomConvFeatures(int64_t in_channels, int64_t width, int64_t n_layers, uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int64_t in = in_channels;
  for (int64_t i = 0; i < n_layers; ++i) {
    auto conv = torch::nn::Conv3d(torch::nn::Conv3dOptions(in, width, 3).stride({1, 2, 2}).padding(1));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * 27));
    conv->weight.copy_(torch::rand(conv->weight.sizes(), gen) * 2 * bound - bound);
    conv->bias.copy_(torch::rand(conv->bias.sizes(), gen) * 2 * bound - bound);
    conv->weight.set_requires_grad(false);
    conv->bias.set_requires_grad(false);
    layers_.push_back(conv);
    in = width;
  }
}

std::vector<torch::Tensor> RandomConvFeatures::features(const torch::Tensor& clips) {
  std::vector<torch::Tensor> out;
  auto h = clips;
  for (auto& layer : layers_) {
    h = torch::leaky_relu(layer(h), 0.2);
    out.push_back(h);
  }
  return out;
}

void RandomConvFeatures::to(torch::Dtype dtype) {
  for (auto& layer : layers_) layer->to(dtype);
}

torch::Tensor perceptual_loss(const torch::Tensor& real, const torch::Tensor& fake, LayerFeatureNet* extractor) {
  if (extractor == nullptr) {
    static bool warned = false;
    if (!warned) {
      std::cerr << "warning: perceptual loss requested without a feature extractor; the term contributes 0\n";
      warned = true;
    }
    return torch::zeros({}, fake.options());
  }
  std::vector<torch::Tensor> real_f;
  {
    torch::NoGradGuard no_grad;
    real_f = extractor->features(real);
  }
  const auto fake_f = extractor->features(fake);
  const auto weights = extractor->layer_weights();
  if (weights.empty()) return feature_matching(real_f, fake_f);
  if (weights.size() != real_f.size()) throw std::invalid_argument("one perceptual weight per layer required");
  torch::Tensor total = torch::zeros({}, fake.options());
  for (size_t i = 0; i < real_f.size(); ++i) total = total + weights[i] * (fake_f[i] - real_f[i]).abs().sum();
  return total;
}

}  // namespace tats
