#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <string_view>

namespace tats {

enum class PaddingMode { kZero, kReplicate, kReflect, kCircular, kRealFrame };

std::string to_string(PaddingMode mode);
PaddingMode parse_padding_mode(std::string_view name);

// Temporal padding policy of the codec. Spatial axes are always zero padded.
struct PaddingSpec {
  PaddingMode mode = PaddingMode::kReplicate;
  // Real context frames supplied on each side of a clip (real_frame mode only).
  int64_t real_frames_per_side = 0;

  void validate() const;
};

// Pads `amount` slices on both ends of `dim`:
//   zero      -> 0 fill
//   replicate -> copies of the boundary slice
//   reflect   -> mirror excluding the boundary slice (needs amount < T)
//   circular  -> wrap around (needs amount < T)
// real_frame mode has no synthetic padding; the caller provides context frames.
torch::Tensor pad_temporal(const torch::Tensor& x, PaddingMode mode, int64_t amount, int64_t dim = 0);

}  // namespace tats
