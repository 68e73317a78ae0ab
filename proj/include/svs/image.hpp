#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svs/tensor.hpp"

namespace svs {

// 8-bit grayscale image, row-major. Binary masks use {0,255}.
struct Image8 {
  Index h = 0;
  Index w = 0;
  std::vector<std::uint8_t> px;

  Image8() = default;
  Image8(Index h_, Index w_, std::uint8_t fill = 0)
      : h(h_), w(w_), px(std::size_t(h_ * w_), fill) {}

  std::uint8_t& at(Index y, Index x) { return px[std::size_t(y * w + x)]; }
  std::uint8_t at(Index y, Index x) const { return px[std::size_t(y * w + x)]; }
  bool operator==(const Image8&) const = default;
};

bool is_binary_mask(const Image8& img);

// round-half-up with clamping to [0,255]
std::uint8_t quantize_u8(double v);

void write_png(const std::filesystem::path& path, const Image8& img);
Image8 read_png(const std::filesystem::path& path);

// [0,255] -> [0,1] single-image tensor (1,H,W,1)
template <class Scalar>
Tensor<Scalar> image_to_tensor(const Image8& img) {
  Tensor<Scalar> t(Shape{1, img.h, img.w, 1});
  for (Index i = 0; i < img.h * img.w; ++i)
    t.data()[i] = Scalar(img.px[std::size_t(i)]) / Scalar(255);
  return t;
}

// {0,255} mask -> {0,1} tensor (1,H,W,1)
template <class Scalar>
Tensor<Scalar> mask_to_tensor(const Image8& mask) {
  require(is_binary_mask(mask), "mask is not binary (values must be 0 or 255)");
  Tensor<Scalar> t(Shape{1, mask.h, mask.w, 1});
  for (Index i = 0; i < mask.h * mask.w; ++i)
    t.data()[i] = mask.px[std::size_t(i)] ? Scalar(1) : Scalar(0);
  return t;
}

// [0,1] map -> 8-bit image, round-half-up; batch index selects the image
template <class Scalar>
Image8 tensor_to_image(const Tensor<Scalar>& t, Index b = 0) {
  const Shape s = t.shape();
  require(s.c == 1 && b < s.b, "tensor_to_image expects (B,H,W,1), got ",
          to_string(s), " with batch index ", b);
  Image8 img(s.h, s.w);
  for (Index y = 0; y < s.h; ++y)
    for (Index x = 0; x < s.w; ++x)
      img.at(y, x) = quantize_u8(double(t.at(b, y, x, 0)) * 255.0);
  return img;
}

}  // namespace svs
