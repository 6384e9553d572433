#include "tats/padding.hpp"

#include "tats/error.hpp"

#include <stdexcept>

namespace tats {

std::string to_string(PaddingMode mode) {
  switch (mode) {
    case PaddingMode::kZero:
      return "zero";
    case PaddingMode::kReplicate:
      return "replicate";
    case PaddingMode::kReflect:
      return "reflect";
    case PaddingMode::kCircular:
      return "circular";
    case PaddingMode::kRealFrame:
      return "real_frame";
  }
  return "unknown";
}

PaddingMode parse_padding_mode(std::string_view name) {
  if (name == "zero") return PaddingMode::kZero;
  if (name == "replicate") return PaddingMode::kReplicate;
  if (name == "reflect") return PaddingMode::kReflect;
  if (name == "circular") return PaddingMode::kCircular;
  if (name == "real_frame") return PaddingMode::kRealFrame;
  throw ConfigError("unknown padding mode '" + std::string(name) + "'");
}

void PaddingSpec::validate() const {
  if (real_frames_per_side < 0) throw ConfigError("real_frames_per_side must be non-negative");
  if (real_frames_per_side > 0 && mode != PaddingMode::kRealFrame) {
    throw ConfigError("real_frames_per_side > 0 requires real_frame padding");
  }
}

torch::Tensor pad_temporal(const torch::Tensor& x, PaddingMode mode, int64_t amount, int64_t dim) {
  if (amount < 0) throw std::invalid_argument("padding amount must be non-negative");
  if (amount == 0) return x;
  const int64_t len = x.size(dim);
  switch (mode) {
    case PaddingMode::kZero: {
      auto shape = x.sizes().vec();
      shape[static_cast<size_t>(dim)] = amount;
      auto zeros = torch::zeros(shape, x.options());
      return torch::cat({zeros, x, zeros}, dim);
    }
    case PaddingMode::kReplicate: {
      auto idx = torch::arange(-amount, len + amount, torch::kInt64).clamp(0, len - 1);
      return x.index_select(dim, idx);
    }
    case PaddingMode::kReflect: {
      if (amount >= len) throw std::invalid_argument("reflect padding needs amount < length");
      auto idx = torch::arange(-amount, len + amount, torch::kInt64).abs();
      idx = torch::where(idx >= len, 2 * (len - 1) - idx, idx);
      return x.index_select(dim, idx);
    }
    case PaddingMode::kCircular: {
      if (amount >= len) throw std::invalid_argument("circular padding needs amount < length");
      auto idx = torch::remainder(torch::arange(-amount, len + amount, torch::kInt64), len);
      return x.index_select(dim, idx);
    }
    case PaddingMode::kRealFrame:
      throw std::invalid_argument("real_frame padding takes context frames from the caller");
  }
  throw std::invalid_argument("unknown padding mode");
}

}  // namespace tats
