#include "svs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace svs {

namespace {

// Rasterization constants, frozen after calibrating the default config so the
// vessel pixel fraction of 64x64 scenes stays within [0.05, 0.35].
constexpr double kPeakMin = 60.0;    // vessel centerline intensity range
constexpr double kPeakMax = 115.0;
constexpr double kTurnSigma = 0.14;  // walk direction jitter (rad)
constexpr double kWidthDecay = 0.985;
constexpr double kBranchShrink = 0.75;
constexpr double kFeatherPx = 2.5;   // vessel fade band outside np boundary
constexpr int kMaxSegmentsPerTree = 12;

struct WalkState {
  double x, y;
  double angle;
  double width;
};

struct Ellipse {
  double cx, cy, rx, ry, cos_t, sin_t;

  // <1 inside, 1 on the boundary, grows outward
  double metric(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = dx * cos_t + dy * sin_t;
    const double v = -dx * sin_t + dy * cos_t;
    return std::sqrt((u * u) / (rx * rx) + (v * v) / (ry * ry));
  }
};

void stamp_gaussian_profile(std::vector<double>& field, int size, double px,
                            double py, double width, double peak) {
  const double sigma = std::max(width * 0.5, 0.25);
  const double reach = 3.0 * sigma;
  const int x0 = std::max(0, int(std::floor(px - reach)));
  const int x1 = std::min(size - 1, int(std::ceil(px + reach)));
  const int y0 = std::max(0, int(std::floor(py - reach)));
  const int y1 = std::min(size - 1, int(std::ceil(py + reach)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
      const double val = peak * std::exp(-d2 / (2.0 * sigma * sigma));
      double& cell = field[std::size_t(y) * size + x];
      cell = std::max(cell, val);
    }
}

void grow_tree(std::vector<double>& field, const SceneConfig& cfg,
               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int size = cfg.size;

  // entry point on a random border side, heading inward
  const int side = int(rng() % 4);
  const double offset = (0.15 + 0.7 * unit(rng)) * size;
  WalkState start{};
  switch (side) {
    case 0: start = {offset, 0.0, std::numbers::pi / 2, 0.0}; break;   // top
    case 1: start = {offset, double(size - 1), -std::numbers::pi / 2, 0.0}; break;
    case 2: start = {0.0, offset, 0.0, 0.0}; break;                    // left
    default: start = {double(size - 1), offset, std::numbers::pi, 0.0}; break;
  }
  start.angle += (unit(rng) - 0.5) * 1.2;
  start.width = cfg.width_start_min +
                unit(rng) * (cfg.width_start_max - cfg.width_start_min);
  const double peak = kPeakMin + unit(rng) * (kPeakMax - kPeakMin);

  std::normal_distribution<double> turn(0.0, kTurnSigma);
  std::vector<WalkState> pending{start};
  int segments = 0;
  while (!pending.empty() && segments < kMaxSegmentsPerTree) {
    WalkState s = pending.back();
    pending.pop_back();
    ++segments;
    const int max_steps = 2 * size;
    for (int step = 0; step < max_steps; ++step) {
      if (s.x < -3.0 || s.x > size + 2.0 || s.y < -3.0 || s.y > size + 2.0)
        break;
      stamp_gaussian_profile(field, size, s.x, s.y, s.width, peak);
      s.x += std::cos(s.angle);
      s.y += std::sin(s.angle);
      s.angle += turn(rng);
      s.width = cfg.width_min + (s.width - cfg.width_min) * kWidthDecay;
      if (unit(rng) < cfg.branch_prob && s.width > 1.5 * cfg.width_min) {
        WalkState child = s;
        const double split = 0.35 + 0.45 * unit(rng);
        const bool left = unit(rng) < 0.5;
        child.angle += left ? split : -split;
        s.angle += left ? -split * 0.4 : split * 0.4;
        child.width *= kBranchShrink;
        s.width *= 0.9;
        pending.push_back(child);
      }
    }
  }
}

double speckle_pixel(double value, double gain, std::mt19937_64& rng) {
  const double r = rayleigh_unit_mean(rng);
  return value * (1.0 + gain * (r - 1.0));
}

}  // namespace

void SceneConfig::validate() const {
  require(size >= 8, "scene size must be >= 8, got ", size);
  require(n_seeds >= 0, "n_seeds must be >= 0, got ", n_seeds);
  require(branch_prob >= 0.0 && branch_prob <= 1.0,
          "branch_prob must be in [0,1], got ", branch_prob);
  require(width_start_min >= 0.0 && width_start_max >= width_start_min,
          "width_start range [", width_start_min, ",", width_start_max,
          "] must be ordered and non-negative");
  require(width_min > 0.0, "width_min must be > 0, got ", width_min);
  require(np_count_min >= 0 && np_count_max >= np_count_min,
          "np count range [", np_count_min, ",", np_count_max,
          "] must be ordered and non-negative");
  require(np_radius_frac_min >= 0.0 &&
              np_radius_frac_max >= np_radius_frac_min,
          "np radius fraction range [", np_radius_frac_min, ",",
          np_radius_frac_max, "] must be ordered and non-negative");
  require(np_radius_frac_max * size < size / 2.0,
          "np radius ", np_radius_frac_max * size, " px too large for a ",
          size, " px image");
  require(speckle_gain >= 0.0 && speckle_gain_np >= 0.0,
          "speckle gains must be non-negative");
  require(background_level >= 0.0 && background_level <= 255.0,
          "background_level must be in [0,255], got ", background_level);
  require(mask_threshold >= 0.0, "mask_threshold must be >= 0, got ",
          mask_threshold);
}

double rayleigh_unit_mean(std::mt19937_64& rng) {
  // scale sqrt(2/pi) gives mean exactly 1
  static const double scale = std::sqrt(2.0 / std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  return scale * std::sqrt(-2.0 * std::log1p(-u));
}

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int size = cfg.size;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // 1) vessel trees
  std::vector<double> vessel(std::size_t(size) * size, 0.0);
  for (int t = 0; t < cfg.n_seeds; ++t) grow_tree(vessel, cfg, rng);

  // 2) non-perfusion cutouts: vessels erased inside, feathered at the rim
  const int np_count =
      cfg.np_count_min +
      int(rng() % std::uint64_t(cfg.np_count_max - cfg.np_count_min + 1));
  std::vector<Ellipse> regions;
  for (int k = 0; k < np_count; ++k) {
    Ellipse e{};
    e.cx = unit(rng) * size;
    e.cy = unit(rng) * size;
    e.rx = (cfg.np_radius_frac_min +
            unit(rng) * (cfg.np_radius_frac_max - cfg.np_radius_frac_min)) *
           size;
    e.ry = (cfg.np_radius_frac_min +
            unit(rng) * (cfg.np_radius_frac_max - cfg.np_radius_frac_min)) *
           size;
    const double theta = unit(rng) * std::numbers::pi;
    e.cos_t = std::cos(theta);
    e.sin_t = std::sin(theta);
    regions.push_back(e);
  }

  Scene scene;
  scene.np_region = Image8(size, size, 0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      for (const Ellipse& e : regions) {
        const double m = e.metric(x, y);
        if (m <= 1.0) scene.np_region.at(y, x) = 255;
        const double fade =
            std::clamp((m - 1.0) * std::min(e.rx, e.ry) / kFeatherPx, 0.0, 1.0);
        vessel[std::size_t(y) * size + x] *= fade;
      }
    }

  // 3) ground truth from the pre-noise vessel intensity
  scene.mask = Image8(size, size, 0);
  for (int i = 0; i < size * size; ++i)
    if (vessel[std::size_t(i)] > cfg.mask_threshold)
      scene.mask.px[std::size_t(i)] = 255;

  // 4) background + vessels, then multiplicative speckle
  scene.image = Image8(size, size, 0);
  for (int i = 0; i < size * size; ++i) {
    const double clean =
        std::min(255.0, cfg.background_level + vessel[std::size_t(i)]);
    const double gain = scene.np_region.px[std::size_t(i)]
                            ? cfg.speckle_gain_np
                            : cfg.speckle_gain;
    scene.image.px[std::size_t(i)] =
        quantize_u8(speckle_pixel(clean, gain, rng));
  }
  return scene;
}

Image8 speckle_stress(const Image8& clean, const Image8& np_region,
                      const SceneConfig& cfg, std::mt19937_64& rng) {
  require(clean.h == np_region.h && clean.w == np_region.w,
          "speckle_stress: image ", clean.h, "x", clean.w,
          " and np region ", np_region.h, "x", np_region.w, " differ");
  Image8 out(clean.h, clean.w);
  for (Index i = 0; i < clean.h * clean.w; ++i) {
    const double gain = np_region.px[std::size_t(i)] ? cfg.speckle_gain_np
                                                     : cfg.speckle_gain;
    out.px[std::size_t(i)] =
        quantize_u8(speckle_pixel(double(clean.px[std::size_t(i)]), gain, rng));
  }
  return out;
}

}  // namespace svs
