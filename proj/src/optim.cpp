#include "tats/optim.hpp"

#include "tats/checkpoint.hpp"

#include <cmath>

namespace tats {

Adam::Adam(std::vector<torch::Tensor> params, const AdamConfig& config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    exp_avg_.push_back(torch::zeros_like(p));
    exp_avg_sq_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
}

void Adam::step() {
  torch::NoGradGuard no_grad;
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.grad().defined()) continue;
    const auto& g = p.grad();
    exp_avg_[i].mul_(config_.beta1).add_(g, 1.0 - config_.beta1);
    exp_avg_sq_[i].mul_(config_.beta2).addcmul_(g, g, 1.0 - config_.beta2);
    if (config_.weight_decay > 0) p.mul_(1.0 - config_.lr * config_.weight_decay);
    auto denom = (exp_avg_sq_[i] / bc2).sqrt_().add_(config_.eps);
    p.addcdiv_(exp_avg_[i], denom, -config_.lr / bc1);
  }
}

void Adam::save(Checkpoint& ckpt, const std::string& prefix) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    ckpt.tensors[prefix + "m." + std::to_string(i)] = exp_avg_[i].clone();
    ckpt.tensors[prefix + "v." + std::to_string(i)] = exp_avg_sq_[i].clone();
  }
  ckpt.tensors[prefix + "steps"] = torch::tensor({steps_}, torch::kInt64);
}

void Adam::load(const Checkpoint& ckpt, const std::string& prefix) {
  for (size_t i = 0; i < params_.size(); ++i) {
    exp_avg_[i] = ckpt.at(prefix + "m." + std::to_string(i)).clone().to(params_[i].scalar_type());
    exp_avg_sq_[i] = ckpt.at(prefix + "v." + std::to_string(i)).clone().to(params_[i].scalar_type());
  }
  steps_ = ckpt.at(prefix + "steps").item<int64_t>();
}

double grad_norm(const std::vector<torch::Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.grad().defined()) sq += p.grad().to(torch::kFloat64).square().sum().item<double>();
  }
  return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<torch::Tensor>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    torch::NoGradGuard no_grad;
    const double scale = max_norm / norm;
    for (const auto& p : params) {
      if (p.grad().defined()) p.grad().mul_(scale);
    }
    return grad_norm(params);
  }
  return norm;
}

}  // namespace tats
