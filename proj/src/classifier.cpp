#include "tats/classifier.hpp"

#include "tats/checkpoint.hpp"
#include "tats/error.hpp"
#include "tats/optim.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace tats {

namespace {
constexpr int64_t kInferenceChunk = 32;

torch::Tensor chunked(const torch::Tensor& clips, const std::function<torch::Tensor(const torch::Tensor&)>& fn) {
  std::vector<torch::Tensor> parts;
  for (int64_t i = 0; i < clips.size(0); i += kInferenceChunk) {
    parts.push_back(fn(clips.narrow(0, i, std::min(kInferenceChunk, clips.size(0) - i))));
  }
  return torch::cat(parts, 0);
}
}  // namespace

void ClassifierConfig::validate() const {
  if (in_channels != 1 && in_channels != 3) throw ConfigError("classifier.in_channels must be 1 or 3");
  if (width < 1 || feature_dim < 1) throw ConfigError("classifier widths must be >= 1");
  if (n_classes < 2) throw ConfigError("classifier needs at least 2 classes");
  if (steps < 0 || batch_size < 1 || !(lr > 0)) throw ConfigError("invalid classifier training settings");
}

Json to_json(const ClassifierConfig& c) {
  return Json{{"in_channels", c.in_channels}, {"width", c.width}, {"feature_dim", c.feature_dim},
              {"n_classes", c.n_classes},     {"steps", c.steps}, {"batch_size", c.batch_size},
              {"lr", c.lr},                   {"seed", c.seed}};
}

ClassifierConfig classifier_config_from_json(const Json& j) {
  ClassifierConfig c;
  StrictReader r(j, "classifier");
  r.read("in_channels", c.in_channels)
      .read("width", c.width)
      .read("feature_dim", c.feature_dim)
      .read("n_classes", c.n_classes)
      .read("steps", c.steps)
      .read("batch_size", c.batch_size)
      .read("lr", c.lr)
      .read("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

ClassifierNetImpl::ClassifierNetImpl(const ClassifierConfig& c) {
  using torch::nn::Conv3dOptions;
  const int64_t w = c.width;
  body_ = register_module(
      "body", torch::nn::Sequential(
                  torch::nn::Conv3d(Conv3dOptions(c.in_channels, w, 3).stride({1, 2, 2}).padding(1)),
                  torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)),
                  torch::nn::Conv3d(Conv3dOptions(w, 2 * w, 3).stride(2).padding(1)),
                  torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)),
                  torch::nn::Conv3d(Conv3dOptions(2 * w, c.feature_dim, 3).stride(2).padding(1)),
                  torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2))));
  head_ = register_module("head", torch::nn::Linear(c.feature_dim, c.n_classes));
}

torch::Tensor ClassifierNetImpl::features(const torch::Tensor& clips) {
  return body_->forward(clips).mean({2, 3, 4});
}

torch::Tensor ClassifierNetImpl::forward(const torch::Tensor& clips) { return head_->forward(features(clips)); }

ClipClassifier::ClipClassifier(const ClassifierConfig& config) : config_(config) {
  config_.validate();
  torch::manual_seed(config_.seed);
  net_ = ClassifierNet(config_);
}

FeatureMatrix ClipClassifier::features(const torch::Tensor& clips) {
  torch::NoGradGuard no_grad;
  net_->eval();
  return to_eigen(chunked(clips, [&](const torch::Tensor& x) { return net_->features(x); }));
}

Eigen::MatrixXd ClipClassifier::probabilities(const torch::Tensor& clips) {
  torch::NoGradGuard no_grad;
  net_->eval();
  return to_eigen(chunked(clips, [&](const torch::Tensor& x) {
    return torch::softmax(net_->forward(x).to(torch::kFloat64), 1);
  }));
}

double ClipClassifier::accuracy(const torch::Tensor& clips, const std::vector<int64_t>& labels) {
  const auto probs = probabilities(clips);
  int64_t correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    correct += best == labels[static_cast<size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

void ClipClassifier::save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put(prefix, *net_);
  ckpt.metadata[prefix + "config"] = to_json(config_);
}

ClipClassifier ClipClassifier::load(const Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.metadata.contains(prefix + "config")) throw ConfigError("checkpoint has no classifier");
  ClipClassifier c(classifier_config_from_json(ckpt.metadata.at(prefix + "config")));
  ckpt.get(prefix, *c.net_);
  return c;
}

ClipClassifier train_clip_classifier(const torch::Tensor& clips, const std::vector<int64_t>& labels,
                                     const ClassifierConfig& config) {
  if (clips.dim() != 5 || clips.size(0) != static_cast<int64_t>(labels.size())) {
    throw std::invalid_argument("classifier training expects N x C x T x H x W clips with N labels");
  }
  ClipClassifier classifier(config);
  auto& net = classifier.net();
  net->train();
  AdamConfig opt_config{config.lr, 0.9, 0.999, 1e-8, 0.0};
  Adam opt(net->parameters(), opt_config);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int64_t> pick(0, clips.size(0) - 1);
  auto label_tensor = torch::tensor(labels, torch::kInt64);
  for (int64_t step = 0; step < config.steps; ++step) {
    std::vector<int64_t> idx;
    for (int64_t i = 0; i < config.batch_size; ++i) idx.push_back(pick(rng));
    auto sel = torch::tensor(idx, torch::kInt64);
    opt.zero_grad();
    auto loss = torch::nn::functional::cross_entropy(net->forward(clips.index_select(0, sel)),
                                                     label_tensor.index_select(0, sel));
    if (!std::isfinite(loss.item<double>())) {
      throw DivergenceError("classifier loss is non-finite at step " + std::to_string(step));
    }
    loss.backward();
    opt.step();
  }
  net->eval();
  return classifier;
}

RandomFeatureExtractor::RandomFeatureExtractor(int64_t in_channels, int64_t width, uint64_t seed) : width_(width) {
  torch::manual_seed(seed);
  using torch::nn::Conv3dOptions;
  net_ = torch::nn::Sequential(torch::nn::Conv3d(Conv3dOptions(in_channels, width, 3).stride({1, 2, 2}).padding(1)),
                               torch::nn::Tanh(),
                               torch::nn::Conv3d(Conv3dOptions(width, width, 3).stride(2).padding(1)),
                               torch::nn::Tanh());
  net_->eval();
}

FeatureMatrix RandomFeatureExtractor::features(const torch::Tensor& clips) {
  torch::NoGradGuard no_grad;
  return to_eigen(chunked(clips, [&](const torch::Tensor& x) { return net_->forward(x).mean({2, 3, 4}); }));
}

}  // namespace tats
