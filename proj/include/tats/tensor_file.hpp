#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace tats {

// "VTEN v1" binary tensor container:
//   magic "VTEN" | u32 version | u8 dtype code | u8 rank | rank x u64 dims |
//   little-endian row-major payload
enum class DtypeCode : uint8_t {
  kFloat32 = 0,
  kFloat64 = 1,
  kInt32 = 2,
  kUInt32 = 3,
  kInt64 = 4,
  kUInt8 = 5,
};

inline constexpr uint32_t kVtenVersion = 1;

DtypeCode dtype_code(torch::ScalarType type);
torch::ScalarType scalar_type(DtypeCode code);

// Writes the tensor stored as `as` (e.g. u32 token ids from an int64 tensor).
// Values must be representable in the target type.
void write_vten(std::ostream& out, const torch::Tensor& tensor, DtypeCode as);
void write_vten(std::ostream& out, const torch::Tensor& tensor);
// Returns a contiguous CPU tensor. u32 payloads are widened to int64.
torch::Tensor read_vten(std::istream& in);

void save_vten(const std::filesystem::path& path, const torch::Tensor& tensor);
torch::Tensor load_vten(const std::filesystem::path& path);

namespace detail {
void write_u32(std::ostream& out, uint32_t v);
void write_u64(std::ostream& out, uint64_t v);
uint32_t read_u32(std::istream& in);
uint64_t read_u64(std::istream& in);
void write_raw_tensor(std::ostream& out, const torch::Tensor& tensor, DtypeCode as);
torch::Tensor read_raw_tensor(std::istream& in, DtypeCode code, const std::vector<int64_t>& dims);
}  // namespace detail

}  // namespace tats
