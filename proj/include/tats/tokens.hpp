#pragma once

#include "tats/json_util.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>

namespace tats {

// Id layout shared by all priors: codebook ids [0, K), condition ids
// [K, K + n_cond), then one start-of-sequence id.
struct TokenVocab {
  int64_t codebook_size = 0;  // K
  int64_t n_cond = 0;

  int64_t condition_id(int64_t c) const;
  int64_t sos_id() const { return codebook_size + n_cond; }
  int64_t size() const { return codebook_size + n_cond + 1; }
};

// t x h x w token grid of one clip.
struct TokenGrid {
  torch::Tensor indices;  // int64

  int64_t slices() const { return indices.size(0); }
  int64_t height() const { return indices.size(1); }
  int64_t width() const { return indices.size(2); }
};

// Flat id stream: prefix ids followed by slices in row-major order.
struct TokenSequence {
  torch::Tensor ids;  // int64, 1D
  int64_t slice_h = 1;
  int64_t slice_w = 1;
  int64_t n_prefix = 0;
  int64_t vocab = 0;

  int64_t slice_len() const { return slice_h * slice_w; }
};

// Slice 0 row by row, then slice 1, ... Works on batches too: a leading
// dimension of grids (B x t x h x w) yields B x (t h w).
TokenSequence flatten(const TokenGrid& grid, int64_t vocab = 0);
TokenGrid unflatten(const TokenSequence& seq);
torch::Tensor flatten_batch(const torch::Tensor& grids);
torch::Tensor unflatten_batch(const torch::Tensor& ids, int64_t slice_h, int64_t slice_w);

struct VtokMetadata {
  int64_t slice_len = 0;
  int64_t vocab = 0;
  int64_t codebook_size = 0;
  int64_t n_cond = 0;
  Json extra = Json::object();
};

// "VTOK v1": magic "VTOK" | u32 version | u64 metadata length | metadata JSON
// {slice_len, vocab, K, n_cond, ...} | VTEN v1 record with u32 ids.
void save_vtok(const std::filesystem::path& path, const torch::Tensor& ids, const VtokMetadata& meta);
std::pair<torch::Tensor, VtokMetadata> load_vtok(const std::filesystem::path& path);

}  // namespace tats
