#pragma once

#include "tats/json_util.hpp"
#include "tats/metrics.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace tats {

struct Checkpoint;

// Maps B x C x T x H x W clips to one feature row per clip.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureMatrix features(const torch::Tensor& clips) = 0;
  virtual std::string name() const = 0;
  virtual int64_t dim() const = 0;
};

struct ClassifierConfig {
  int64_t in_channels = 1;
  int64_t width = 8;
  int64_t feature_dim = 16;
  int64_t n_classes = 2;
  int64_t steps = 300;
  int64_t batch_size = 16;
  double lr = 1e-3;
  uint64_t seed = 0;

  void validate() const;
};

Json to_json(const ClassifierConfig& config);
ClassifierConfig classifier_config_from_json(const Json& j);

class ClassifierNetImpl : public torch::nn::Module {
 public:
  explicit ClassifierNetImpl(const ClassifierConfig& config);
  // Penultimate activations, B x feature_dim.
  torch::Tensor features(const torch::Tensor& clips);
  torch::Tensor forward(const torch::Tensor& clips);

 private:
  torch::nn::Sequential body_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ClassifierNet);

// Small 3D conv classifier; its penultimate layer doubles as the default
// feature extractor.
class ClipClassifier : public FeatureExtractor {
 public:
  explicit ClipClassifier(const ClassifierConfig& config);

  FeatureMatrix features(const torch::Tensor& clips) override;
  std::string name() const override { return "clip_classifier"; }
  int64_t dim() const override { return config_.feature_dim; }

  // N x n_classes, rows sum to 1.
  Eigen::MatrixXd probabilities(const torch::Tensor& clips);
  double accuracy(const torch::Tensor& clips, const std::vector<int64_t>& labels);

  ClassifierNet& net() { return net_; }
  const ClassifierConfig& config() const { return config_; }

  void save(Checkpoint& ckpt, const std::string& prefix = "classifier.") const;
  static ClipClassifier load(const Checkpoint& ckpt, const std::string& prefix = "classifier.");

 private:
  ClassifierConfig config_;
  ClassifierNet net_{nullptr};
};

// Deterministic given config.seed. clips: N x C x T x H x W.
ClipClassifier train_clip_classifier(const torch::Tensor& clips, const std::vector<int64_t>& labels,
                                     const ClassifierConfig& config);

// Fixed random-weight conv stack, global-average pooled.
class RandomFeatureExtractor : public FeatureExtractor {
 public:
  RandomFeatureExtractor(int64_t in_channels, int64_t width, uint64_t seed);
  FeatureMatrix features(const torch::Tensor& clips) override;
  std::string name() const override { return "random_conv"; }
  int64_t dim() const override { return width_; }

 private:
  int64_t width_;
  torch::nn::Sequential net_{nullptr};
};

}  // namespace tats
