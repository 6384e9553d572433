#include "tats/image_io.hpp"

#include <png.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace tats {

torch::Tensor read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + image.message);
  }
  int64_t channels = 3;
  if ((image.format & PNG_FORMAT_FLAG_COLOR) == 0) {
    image.format = PNG_FORMAT_GRAY;
    channels = 1;
  } else if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    image.format = PNG_FORMAT_RGBA;
    channels = 4;
  } else {
    image.format = PNG_FORMAT_RGB;
  }
  auto out = torch::empty({static_cast<int64_t>(image.height), static_cast<int64_t>(image.width), channels}, torch::kUInt8);
  if (!png_image_finish_read(&image, nullptr, out.data_ptr<uint8_t>(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + image.message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  auto pixels = image.to(torch::kUInt8).contiguous();
  if (pixels.dim() != 3) throw std::invalid_argument("write_png expects H x W x C");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(pixels.size(1));
  png.height = static_cast<png_uint_32>(pixels.size(0));
  switch (pixels.size(2)) {
    case 1:
      png.format = PNG_FORMAT_GRAY;
      break;
    case 3:
      png.format = PNG_FORMAT_RGB;
      break;
    case 4:
      png.format = PNG_FORMAT_RGBA;
      break;
    default:
      throw std::invalid_argument("write_png supports 1, 3 or 4 channels");
  }
  if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data_ptr<uint8_t>(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + png.message);
  }
}

torch::Tensor to_uint8(const torch::Tensor& values) {
  return ((values.to(torch::kFloat64).clamp(-1.0, 1.0) + 1.0) * 127.5).round().to(torch::kUInt8);
}

torch::Tensor from_uint8(const torch::Tensor& pixels) {
  return pixels.to(torch::kFloat32) / 127.5f - 1.0f;
}

namespace {

class GifBits {
 public:
  void put(uint32_t code, uint32_t size) {
    acc_ |= code << nbits_;
    nbits_ += size;
    while (nbits_ >= 8) {
      bytes_.push_back(static_cast<uint8_t>(acc_ & 0xFF));
      acc_ >>= 8;
      nbits_ -= 8;
    }
  }
  std::vector<uint8_t> finish() {
    if (nbits_ > 0) bytes_.push_back(static_cast<uint8_t>(acc_ & 0xFF));
    acc_ = 0;
    nbits_ = 0;
    return std::move(bytes_);
  }

 private:
  std::vector<uint8_t> bytes_;
  uint32_t acc_ = 0;
  uint32_t nbits_ = 0;
};

// LZW with 8-bit minimum code size, codes up to 12 bits.
std::vector<uint8_t> lzw_encode(const std::vector<uint8_t>& indices) {
  constexpr uint32_t kClear = 256;
  constexpr uint32_t kEnd = 257;
  GifBits bits;
  std::unordered_map<uint32_t, uint32_t> dict;
  uint32_t code_size = 9;
  uint32_t max_code = kEnd;
  bits.put(kClear, code_size);
  uint32_t prefix = indices.front();
  for (size_t i = 1; i < indices.size(); ++i) {
    const uint32_t key = (prefix << 8) | indices[i];
    if (auto it = dict.find(key); it != dict.end()) {
      prefix = it->second;
      continue;
    }
    bits.put(prefix, code_size);
    dict.emplace(key, ++max_code);
    if (max_code >= (1u << code_size)) ++code_size;
    if (max_code == 4095) {
      bits.put(kClear, code_size);
      dict.clear();
      code_size = 9;
      max_code = kEnd;
    }
    prefix = indices[i];
  }
  bits.put(prefix, code_size);
  bits.put(kEnd, code_size);
  return bits.finish();
}

void put_u16(std::ofstream& out, uint16_t v) {
  const std::array<char, 2> b = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(b.data(), 2);
}

}  // namespace

void write_gif(const std::filesystem::path& path, const torch::Tensor& frames, int delay_centiseconds) {
  auto pixels = frames.to(torch::kUInt8).contiguous();
  if (pixels.dim() != 4 || (pixels.size(3) != 1 && pixels.size(3) != 3)) {
    throw std::invalid_argument("write_gif expects T x H x W x C with C in {1, 3}");
  }
  const bool gray = pixels.size(3) == 1;
  const auto t_len = pixels.size(0);
  const auto height = pixels.size(1);
  const auto width = pixels.size(2);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write("GIF89a", 6);
  put_u16(out, static_cast<uint16_t>(width));
  put_u16(out, static_cast<uint16_t>(height));
  out.put(static_cast<char>(0xF7));
  out.put(0);
  out.put(0);
  for (int i = 0; i < 256; ++i) {
    if (gray) {
      out.put(static_cast<char>(i)).put(static_cast<char>(i)).put(static_cast<char>(i));
    } else {
      out.put(static_cast<char>(((i >> 5) & 7) * 255 / 7));
      out.put(static_cast<char>(((i >> 2) & 7) * 255 / 7));
      out.put(static_cast<char>((i & 3) * 255 / 3));
    }
  }
  // Loop forever.
  out.write("\x21\xFF\x0BNETSCAPE2.0\x03\x01\x00\x00\x00", 19);

  const auto* data = pixels.data_ptr<uint8_t>();
  const int64_t frame_pixels = height * width;
  for (int64_t t = 0; t < t_len; ++t) {
    out.write("\x21\xF9\x04\x00", 4);
    put_u16(out, static_cast<uint16_t>(delay_centiseconds));
    out.put(0).put(0);
    out.put(0x2C);
    put_u16(out, 0);
    put_u16(out, 0);
    put_u16(out, static_cast<uint16_t>(width));
    put_u16(out, static_cast<uint16_t>(height));
    out.put(0);

    std::vector<uint8_t> indices(static_cast<size_t>(frame_pixels));
    for (int64_t p = 0; p < frame_pixels; ++p) {
      if (gray) {
        indices[static_cast<size_t>(p)] = data[t * frame_pixels + p];
      } else {
        const auto* px = data + (t * frame_pixels + p) * 3;
        indices[static_cast<size_t>(p)] = static_cast<uint8_t>((px[0] >> 5) << 5 | (px[1] >> 5) << 2 | (px[2] >> 6));
      }
    }
    out.put(8);
    const auto encoded = lzw_encode(indices);
    for (size_t pos = 0; pos < encoded.size(); pos += 255) {
      const auto n = std::min<size_t>(255, encoded.size() - pos);
      out.put(static_cast<char>(n));
      out.write(reinterpret_cast<const char*>(encoded.data() + pos), static_cast<std::streamsize>(n));
    }
    out.put(0);
  }
  out.put(0x3B);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace tats
