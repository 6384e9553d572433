#pragma once

#include <torch/torch.h>

#include <filesystem>

namespace tats {

// 8-bit images as H x W x C uint8 tensors (C = 1, 3 or 4).
torch::Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

// [-1, 1] float <-> [0, 255] uint8.
torch::Tensor to_uint8(const torch::Tensor& values);
torch::Tensor from_uint8(const torch::Tensor& pixels);

// Animated GIF89a from T x H x W x C uint8 frames (C = 1 or 3). Colour frames
// use a fixed 3-3-2 palette.
void write_gif(const std::filesystem::path& path, const torch::Tensor& frames, int delay_centiseconds = 10);

}  // namespace tats
