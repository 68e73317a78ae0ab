#pragma once

#include "svs/image.hpp"

namespace svs {

// Global (Otsu) and local mean-offset thresholding baselines.
struct ThresholdConfig {
  enum class Method { otsu, local_mean };
  Method method = Method::otsu;
  int window = 15;     // local mean window, odd
  double offset = 5.0; // intensity above the local mean that counts as vessel

  void validate() const {
    require(window >= 3 && window % 2 == 1,
            "local window must be odd and >= 3, got ", window);
  }
};

// Maximizes between-class variance over the 256-bin histogram; ties break
// toward the smaller threshold. A constant image maps to all-background.
int otsu_threshold_value(const Image8& img);
Image8 otsu_threshold(const Image8& img);

// vessel iff intensity > mean(clamped window) + offset
Image8 local_mean_threshold(const Image8& img, const ThresholdConfig& cfg);

Image8 threshold_image(const Image8& img, const ThresholdConfig& cfg);

}  // namespace svs
