#include "tats/tokens.hpp"

#include "tats/tensor_file.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

namespace tats {

int64_t TokenVocab::condition_id(int64_t c) const {
  if (c < 0 || c >= n_cond) throw std::out_of_range("condition id " + std::to_string(c) + " outside [0, n_cond)");
  return codebook_size + c;
}

TokenSequence flatten(const TokenGrid& grid, int64_t vocab) {
  if (grid.indices.dim() != 3) throw std::invalid_argument("token grid must be t x h x w");
  TokenSequence seq;
  seq.ids = grid.indices.reshape({-1}).to(torch::kInt64).clone();
  seq.slice_h = grid.height();
  seq.slice_w = grid.width();
  seq.vocab = vocab;
  return seq;
}

TokenGrid unflatten(const TokenSequence& seq) {
  const int64_t body = seq.ids.size(0) - seq.n_prefix;
  if (seq.slice_len() <= 0 || body < 0 || body % seq.slice_len() != 0) {
    throw std::invalid_argument("sequence length " + std::to_string(body) + " is not divisible by slice length " +
                                std::to_string(seq.slice_len()));
  }
  return TokenGrid{seq.ids.narrow(0, seq.n_prefix, body).reshape({-1, seq.slice_h, seq.slice_w}).clone()};
}

torch::Tensor flatten_batch(const torch::Tensor& grids) {
  if (grids.dim() != 4) throw std::invalid_argument("flatten_batch expects B x t x h x w");
  return grids.reshape({grids.size(0), -1}).to(torch::kInt64);
}

torch::Tensor unflatten_batch(const torch::Tensor& ids, int64_t slice_h, int64_t slice_w) {
  const int64_t slice_len = slice_h * slice_w;
  if (ids.dim() != 2 || slice_len <= 0 || ids.size(1) % slice_len != 0) {
    throw std::invalid_argument("sequence length is not divisible by slice length");
  }
  return ids.reshape({ids.size(0), -1, slice_h, slice_w});
}

namespace {
constexpr std::array<char, 4> kVtokMagic = {'V', 'T', 'O', 'K'};
constexpr uint32_t kVtokVersion = 1;
}  // namespace

void save_vtok(const std::filesystem::path& path, const torch::Tensor& ids, const VtokMetadata& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(kVtokMagic.data(), kVtokMagic.size());
  detail::write_u32(out, kVtokVersion);
  Json j = meta.extra;
  j["slice_len"] = meta.slice_len;
  j["vocab"] = meta.vocab;
  j["K"] = meta.codebook_size;
  j["n_cond"] = meta.n_cond;
  const auto text = j.dump();
  detail::write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_vten(out, ids, DtypeCode::kUInt32);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::pair<torch::Tensor, VtokMetadata> load_vtok(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kVtokMagic) throw std::runtime_error("not a VTOK file");
  if (detail::read_u32(in) != kVtokVersion) throw std::runtime_error("unsupported VTOK version");
  std::string text(detail::read_u64(in), '\0');
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  auto j = Json::parse(text);
  VtokMetadata meta;
  meta.slice_len = j.at("slice_len").get<int64_t>();
  meta.vocab = j.at("vocab").get<int64_t>();
  meta.codebook_size = j.at("K").get<int64_t>();
  meta.n_cond = j.at("n_cond").get<int64_t>();
  for (const auto* key : {"slice_len", "vocab", "K", "n_cond"}) j.erase(key);
  meta.extra = j;
  return {read_vten(in), meta};
}

}  // namespace tats
