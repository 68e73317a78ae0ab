#pragma once

#include <cstdint>
#include <random>

#include "svs/image.hpp"

namespace svs {

// Recipe for one synthetic scene: vessel trees grown from border seeds,
// elliptical non-perfusion cutouts, multiplicative speckle that is stronger
// inside the non-perfusion regions.
struct SceneConfig {
  int size = 64;
  int n_seeds = 3;              // vessel entry points on the border
  double branch_prob = 0.03;    // per walk step
  double width_start_min = 2.0;
  double width_start_max = 4.0;
  double width_min = 0.7;
  int np_count_min = 0;
  int np_count_max = 3;
  double np_radius_frac_min = 0.10;  // fraction of size
  double np_radius_frac_max = 0.25;
  double speckle_gain = 0.35;
  double speckle_gain_np = 0.6;
  double background_level = 30.0;
  double mask_threshold = 40.0;  // vessel intensity above this is ground truth
  std::uint64_t seed = 0;

  void validate() const;
};

struct Scene {
  Image8 image;      // speckled OCTA-like grayscale
  Image8 mask;       // vessel ground truth, {0,255}, disjoint from np_region
  Image8 np_region;  // non-perfusion map, {0,255}
};

Scene generate_scene(const SceneConfig& cfg);

// Unit-mean Rayleigh multiplier sample.
double rayleigh_unit_mean(std::mt19937_64& rng);

// Speckle stage alone: pixel' = clamp(pixel * (1 + gain * (R - 1))) with the
// stronger gain inside np_region. Builds matched noisy/clean pairs.
Image8 speckle_stress(const Image8& clean, const Image8& np_region,
                      const SceneConfig& cfg, std::mt19937_64& rng);

}  // namespace svs
