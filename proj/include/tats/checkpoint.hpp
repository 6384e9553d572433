#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace tats {

// "TATSCKPT v1": magic "TATSCKPT" | u32 version | u32 tensor count |
// per tensor { u32 name length | name | u8 dtype | u8 rank | rank x u64 dims |
// payload } | u64 metadata length | metadata JSON text.
struct Checkpoint {
  std::map<std::string, torch::Tensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  void put(const std::string& prefix, const torch::nn::Module& module);
  // Copies stored values into the module's parameters and buffers. Every
  // module entry must be present with a matching shape.
  void get(const std::string& prefix, torch::nn::Module& module) const;
  const torch::Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors.count(name) > 0; }
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tats
