#include "svs/augment.hpp"

#include <cmath>

namespace svs {

Image8 adjust_brightness(const Image8& image, AugmentRng& rng,
                         const AugmentConfig& cfg) {
  cfg.validate();
  std::uniform_real_distribution<double> dist(-cfg.brightness_range,
                                              cfg.brightness_range);
  const double shift = dist(rng);
  Image8 out(image.h, image.w);
  for (Index i = 0; i < image.h * image.w; ++i)
    out.px[std::size_t(i)] =
        quantize_u8(double(image.px[std::size_t(i)]) + shift);
  return out;
}

Image8 add_gaussian_noise(const Image8& image, double sigma, AugmentRng& rng) {
  if (sigma <= 0.0) return image;
  std::normal_distribution<double> dist(0.0, sigma);
  Image8 out(image.h, image.w);
  for (Index i = 0; i < image.h * image.w; ++i)
    out.px[std::size_t(i)] =
        quantize_u8(double(image.px[std::size_t(i)]) + dist(rng));
  return out;
}

Image8 add_uniform_noise(const Image8& image, double range, AugmentRng& rng) {
  if (range <= 0.0) return image;
  std::uniform_real_distribution<double> dist(-range, range);
  Image8 out(image.h, image.w);
  for (Index i = 0; i < image.h * image.w; ++i)
    out.px[std::size_t(i)] =
        quantize_u8(double(image.px[std::size_t(i)]) + dist(rng));
  return out;
}

Image8 add_noise(const Image8& image, AugmentRng& rng,
                 const AugmentConfig& cfg) {
  cfg.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < 0.5) {
    std::uniform_real_distribution<double> sig(0.0, cfg.gauss_sigma_max);
    return add_gaussian_noise(image, sig(rng), rng);
  }
  return add_uniform_noise(image, cfg.uniform_range, rng);
}

namespace {

Image8 flip_image(const Image8& in, bool horizontal, bool vertical) {
  Image8 out(in.h, in.w);
  for (Index y = 0; y < in.h; ++y)
    for (Index x = 0; x < in.w; ++x) {
      const Index sy = vertical ? in.h - 1 - y : y;
      const Index sx = horizontal ? in.w - 1 - x : x;
      out.at(y, x) = in.at(sy, sx);
    }
  return out;
}

}  // namespace

std::pair<Image8, Image8> random_flip(const Image8& image, const Image8& mask,
                                      AugmentRng& rng) {
  require(image.h == mask.h && image.w == mask.w, "random_flip: image ",
          image.h, "x", image.w, " does not match mask ", mask.h, "x", mask.w);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool horizontal = unit(rng) < 0.5;
  const bool vertical = unit(rng) < 0.5;
  return {flip_image(image, horizontal, vertical),
          flip_image(mask, horizontal, vertical)};
}

namespace {

Image8 pad_then_crop(const Image8& in, Index pad_top, Index pad_left,
                     Index crop_y, Index crop_x, Index crop) {
  Image8 out(crop, crop);
  for (Index y = 0; y < crop; ++y)
    for (Index x = 0; x < crop; ++x) {
      const Index sy = crop_y + y - pad_top;
      const Index sx = crop_x + x - pad_left;
      out.at(y, x) = (sy >= 0 && sy < in.h && sx >= 0 && sx < in.w)
                         ? in.at(sy, sx)
                         : 0;
    }
  return out;
}

}  // namespace

std::pair<Image8, Image8> pad_and_crop(const Image8& image, const Image8& mask,
                                       AugmentRng& rng,
                                       const AugmentConfig& cfg) {
  cfg.validate();
  require(image.h == mask.h && image.w == mask.w, "pad_and_crop: image ",
          image.h, "x", image.w, " does not match mask ", mask.h, "x", mask.w);
  const Index crop = cfg.crop_size > 0 ? cfg.crop_size : image.w;
  std::uniform_real_distribution<double> frac(0.0, cfg.pad_fraction_max);
  const Index extra_rows = Index(std::llround(frac(rng) * double(image.h)));
  const Index extra_cols = Index(std::llround(frac(rng) * double(image.w)));
  const Index padded_h = image.h + extra_rows;
  const Index padded_w = image.w + extra_cols;
  require(crop <= padded_h && crop <= padded_w, "pad_and_crop: crop ", crop,
          "x", crop, " does not fit the padded ", padded_h, "x", padded_w,
          " image");
  const Index pad_top = extra_rows / 2;
  const Index pad_left = extra_cols / 2;
  std::uniform_int_distribution<Index> oy(0, padded_h - crop);
  std::uniform_int_distribution<Index> ox(0, padded_w - crop);
  const Index crop_y = oy(rng);
  const Index crop_x = ox(rng);
  return {pad_then_crop(image, pad_top, pad_left, crop_y, crop_x, crop),
          pad_then_crop(mask, pad_top, pad_left, crop_y, crop_x, crop)};
}

std::pair<Image8, Image8> compose_pipeline(const Image8& image,
                                           const Image8& mask,
                                           const AugmentConfig& cfg,
                                           AugmentRng& rng) {
  cfg.validate();
  if (!cfg.enabled) {
    const Index crop = cfg.crop_size > 0 ? cfg.crop_size : image.w;
    require(crop <= image.h && crop <= image.w, "compose_pipeline: crop ",
            crop, " larger than the ", image.h, "x", image.w, " input");
    // centered deterministic crop keeps the disabled path side-effect free
    const Index y0 = (image.h - crop) / 2, x0 = (image.w - crop) / 2;
    return {pad_then_crop(image, 0, 0, y0, x0, crop),
            pad_then_crop(mask, 0, 0, y0, x0, crop)};
  }
  Image8 img = adjust_brightness(image, rng, cfg);
  img = add_noise(img, rng, cfg);
  auto [flipped_img, flipped_mask] = random_flip(img, mask, rng);
  return pad_and_crop(flipped_img, flipped_mask, rng, cfg);
}

}  // namespace svs
