#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace tats {

struct Checkpoint;

struct AdamConfig {
  double lr = 3e-5;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
  // Decoupled (AdamW) weight decay.
  double weight_decay = 0.0;
};

// Adam over a fixed parameter list, with moments held as plain tensors so
// they can be checkpointed alongside the weights.
class Adam {
 public:
  Adam(std::vector<torch::Tensor> params, const AdamConfig& config);

  void zero_grad();
  void step();

  int64_t steps() const { return steps_; }
  const std::vector<torch::Tensor>& params() const { return params_; }
  AdamConfig& config() { return config_; }

  void save(Checkpoint& ckpt, const std::string& prefix) const;
  void load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> exp_avg_;
  std::vector<torch::Tensor> exp_avg_sq_;
  AdamConfig config_;
  int64_t steps_ = 0;
};

// Global L2 norm over all gradients.
double grad_norm(const std::vector<torch::Tensor>& params);
// Rescales gradients so their global norm is at most max_norm; returns the
// norm after rescaling.
double clip_grad_norm(const std::vector<torch::Tensor>& params, double max_norm);

}  // namespace tats
