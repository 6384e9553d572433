#include "tats/tensor_file.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace tats {

static_assert(std::endian::native == std::endian::little, "VTEN writer assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic = {'V', 'T', 'E', 'N'};

size_t element_size(DtypeCode code) {
  switch (code) {
    case DtypeCode::kFloat32:
    case DtypeCode::kInt32:
    case DtypeCode::kUInt32:
      return 4;
    case DtypeCode::kFloat64:
    case DtypeCode::kInt64:
      return 8;
    case DtypeCode::kUInt8:
      return 1;
  }
  throw std::invalid_argument("unknown VTEN dtype code");
}

}  // namespace

DtypeCode dtype_code(torch::ScalarType type) {
  switch (type) {
    case torch::kFloat32:
      return DtypeCode::kFloat32;
    case torch::kFloat64:
      return DtypeCode::kFloat64;
    case torch::kInt32:
      return DtypeCode::kInt32;
    case torch::kInt64:
      return DtypeCode::kInt64;
    case torch::kUInt8:
      return DtypeCode::kUInt8;
    default:
      throw std::invalid_argument("tensor dtype has no VTEN code");
  }
}

torch::ScalarType scalar_type(DtypeCode code) {
  switch (code) {
    case DtypeCode::kFloat32:
      return torch::kFloat32;
    case DtypeCode::kFloat64:
      return torch::kFloat64;
    case DtypeCode::kInt32:
      return torch::kInt32;
    case DtypeCode::kUInt32:
    case DtypeCode::kInt64:
      return torch::kInt64;
    case DtypeCode::kUInt8:
      return torch::kUInt8;
  }
  throw std::invalid_argument("unknown VTEN dtype code");
}

namespace detail {

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated stream (u32)");
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated stream (u64)");
  return v;
}

void write_raw_tensor(std::ostream& out, const torch::Tensor& tensor, DtypeCode as) {
  auto t = tensor.detach().to(torch::kCPU).contiguous();
  const auto code = static_cast<uint8_t>(as);
  const auto rank = static_cast<uint8_t>(t.dim());
  out.write(reinterpret_cast<const char*>(&code), 1);
  out.write(reinterpret_cast<const char*>(&rank), 1);
  for (int64_t d : t.sizes()) write_u64(out, static_cast<uint64_t>(d));

  if (as == DtypeCode::kUInt32) {
    auto ids = t.to(torch::kInt64);
    if (ids.numel() > 0) {
      const auto lo = ids.min().item<int64_t>();
      const auto hi = ids.max().item<int64_t>();
      if (lo < 0 || hi > std::numeric_limits<uint32_t>::max()) {
        throw std::invalid_argument("values out of range for u32 payload");
      }
    }
    std::vector<uint32_t> buf(ids.data_ptr<int64_t>(), ids.data_ptr<int64_t>() + ids.numel());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    return;
  }
  t = t.to(scalar_type(as)).contiguous();
  out.write(reinterpret_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * element_size(as)));
}

torch::Tensor read_raw_tensor(std::istream& in, DtypeCode code, const std::vector<int64_t>& dims) {
  int64_t numel = 1;
  for (int64_t d : dims) numel *= d;
  if (code == DtypeCode::kUInt32) {
    std::vector<uint32_t> buf(static_cast<size_t>(numel));
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(numel * 4))) {
      throw std::runtime_error("truncated VTEN payload");
    }
    auto t = torch::empty(dims, torch::kInt64);
    auto* p = t.data_ptr<int64_t>();
    for (int64_t i = 0; i < numel; ++i) p[i] = buf[static_cast<size_t>(i)];
    return t;
  }
  auto t = torch::empty(dims, scalar_type(code));
  if (!in.read(reinterpret_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(numel * element_size(code)))) {
    throw std::runtime_error("truncated VTEN payload");
  }
  return t;
}

}  // namespace detail

void write_vten(std::ostream& out, const torch::Tensor& tensor, DtypeCode as) {
  out.write(kMagic.data(), kMagic.size());
  detail::write_u32(out, kVtenVersion);
  detail::write_raw_tensor(out, tensor, as);
}

void write_vten(std::ostream& out, const torch::Tensor& tensor) {
  write_vten(out, tensor, dtype_code(tensor.scalar_type()));
}

torch::Tensor read_vten(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("not a VTEN stream");
  const auto version = detail::read_u32(in);
  if (version != kVtenVersion) throw std::runtime_error("unsupported VTEN version " + std::to_string(version));
  uint8_t code = 0;
  uint8_t rank = 0;
  in.read(reinterpret_cast<char*>(&code), 1);
  in.read(reinterpret_cast<char*>(&rank), 1);
  if (!in) throw std::runtime_error("truncated VTEN header");
  std::vector<int64_t> dims(rank);
  for (auto& d : dims) d = static_cast<int64_t>(detail::read_u64(in));
  return detail::read_raw_tensor(in, static_cast<DtypeCode>(code), dims);
}

void save_vten(const std::filesystem::path& path, const torch::Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_vten(out, tensor);
}

torch::Tensor load_vten(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_vten(in);
}

}  // namespace tats
