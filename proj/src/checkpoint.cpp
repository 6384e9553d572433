#include "tats/checkpoint.hpp"

#include "tats/tensor_file.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

namespace tats {

namespace {
constexpr std::array<char, 8> kMagic = {'T', 'A', 'T', 'S', 'C', 'K', 'P', 'T'};
}

void Checkpoint::put(const std::string& prefix, const torch::nn::Module& module) {
  for (const auto& item : module.named_parameters(true)) tensors[prefix + item.key()] = item.value().detach().clone();
  for (const auto& item : module.named_buffers(true)) tensors[prefix + item.key()] = item.value().detach().clone();
}

void Checkpoint::get(const std::string& prefix, torch::nn::Module& module) const {
  torch::NoGradGuard no_grad;
  auto copy_into = [&](const std::string& key, torch::Tensor& target) {
    const auto& src = at(prefix + key);
    if (src.sizes() != target.sizes()) {
      throw std::runtime_error("checkpoint shape mismatch for " + prefix + key);
    }
    target.copy_(src);
  };
  for (auto& item : module.named_parameters(true)) copy_into(item.key(), item.value());
  for (auto& item : module.named_buffers(true)) copy_into(item.key(), item.value());
}

const torch::Tensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::runtime_error("checkpoint has no tensor named " + name);
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  detail::write_u32(out, kCheckpointVersion);
  detail::write_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    detail::write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_raw_tensor(out, tensor, dtype_code(tensor.scalar_type()));
  }
  const auto meta = ckpt.metadata.dump(2);
  detail::write_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error(path.string() + " is not a TATSCKPT file");
  }
  const auto version = detail::read_u32(in);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ckpt;
  const auto count = detail::read_u32(in);
  for (uint32_t i = 0; i < count; ++i) {
    std::string name(detail::read_u32(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    uint8_t code = 0;
    uint8_t rank = 0;
    in.read(reinterpret_cast<char*>(&code), 1);
    in.read(reinterpret_cast<char*>(&rank), 1);
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = static_cast<int64_t>(detail::read_u64(in));
    ckpt.tensors[name] = detail::read_raw_tensor(in, static_cast<DtypeCode>(code), dims);
  }
  std::string meta(detail::read_u64(in), '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta.size()))) throw std::runtime_error("truncated checkpoint");
  ckpt.metadata = nlohmann::json::parse(meta);
  return ckpt;
}

}  // namespace tats
