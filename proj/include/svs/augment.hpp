#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "svs/image.hpp"

namespace svs {

using AugmentRng = std::mt19937_64;

struct AugmentConfig {
  double brightness_range = 20.0;  // one shift drawn from [-range, range]
  double gauss_sigma_max = 20.0;   // sigma drawn from [0, max]
  double uniform_range = 20.0;     // per-pixel noise in [-range, range]
  double pad_fraction_max = 0.25;  // drawn per side pair from [0, max]
  int crop_size = 0;               // 0 means keep the input size
  bool enabled = true;

  void validate() const {
    require(brightness_range >= 0.0 && gauss_sigma_max >= 0.0 &&
                uniform_range >= 0.0 && pad_fraction_max >= 0.0,
            "augmentation ranges must be non-negative");
    require(crop_size >= 0, "crop_size must be >= 0, got ", crop_size);
  }
};

// (i) one brightness shift for the whole image, clamped to [0,255]
Image8 adjust_brightness(const Image8& image, AugmentRng& rng,
                         const AugmentConfig& cfg);

// noise kernels behind (ii), exposed for the statistical oracles
Image8 add_gaussian_noise(const Image8& image, double sigma, AugmentRng& rng);
Image8 add_uniform_noise(const Image8& image, double range, AugmentRng& rng);

// (ii) coin flip between gaussian (sigma ~ U[0,max]) and uniform noise
Image8 add_noise(const Image8& image, AugmentRng& rng,
                 const AugmentConfig& cfg);

// (iii) independent horizontal/vertical flips, identical on image and mask
std::pair<Image8, Image8> random_flip(const Image8& image, const Image8& mask,
                                      AugmentRng& rng);

// (iv) zero-fill pad by a random fraction per side pair, then a random
// crop_size x crop_size window with identical geometry on image and mask
std::pair<Image8, Image8> pad_and_crop(const Image8& image, const Image8& mask,
                                       AugmentRng& rng,
                                       const AugmentConfig& cfg);

// (i) -> (ii) -> (iii) -> (iv)
std::pair<Image8, Image8> compose_pipeline(const Image8& image,
                                           const Image8& mask,
                                           const AugmentConfig& cfg,
                                           AugmentRng& rng);

}  // namespace svs
