#include "svs/threshold.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace svs {

int otsu_threshold_value(const Image8& img) {
  require(img.h > 0 && img.w > 0, "otsu: empty image");
  std::array<std::int64_t, 256> hist{};
  for (std::uint8_t v : img.px) ++hist[v];
  const double total = double(img.h * img.w);

  double sum_all = 0.0;
  for (int v = 0; v < 256; ++v) sum_all += double(v) * double(hist[v]);

  int best_t = 255;  // degenerate histogram: nothing above threshold
  double best_var = 0.0;
  std::int64_t n0 = 0;
  double sum0 = 0.0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist[t];
    sum0 += double(t) * double(hist[t]);
    const std::int64_t n1 = img.h * img.w - n0;
    if (n0 == 0 || n1 == 0) continue;
    const double w0 = double(n0) / total, w1 = double(n1) / total;
    const double mu0 = sum0 / double(n0);
    const double mu1 = (sum_all - sum0) / double(n1);
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best_var) {  // strict: ties keep the smaller t
      best_var = between;
      best_t = t;
    }
  }
  return best_t;
}

Image8 otsu_threshold(const Image8& img) {
  const int t = otsu_threshold_value(img);
  Image8 mask(img.h, img.w);
  for (Index i = 0; i < img.h * img.w; ++i)
    mask.px[std::size_t(i)] = img.px[std::size_t(i)] > t ? 255 : 0;
  return mask;
}

Image8 local_mean_threshold(const Image8& img, const ThresholdConfig& cfg) {
  cfg.validate();
  require(img.h > 0 && img.w > 0, "local_mean: empty image");
  const Index r = cfg.window / 2;
  const Index ph = img.h + 2 * r, pw = img.w + 2 * r;

  // replicate-pad, then a summed-area table gives every clamped window sum
  std::vector<std::int64_t> integral(std::size_t((ph + 1) * (pw + 1)), 0);
  auto at_int = [&](Index y, Index x) -> std::int64_t& {
    return integral[std::size_t(y * (pw + 1) + x)];
  };
  for (Index y = 0; y < ph; ++y) {
    const Index sy = std::clamp<Index>(y - r, 0, img.h - 1);
    for (Index x = 0; x < pw; ++x) {
      const Index sx = std::clamp<Index>(x - r, 0, img.w - 1);
      at_int(y + 1, x + 1) = std::int64_t(img.at(sy, sx)) + at_int(y, x + 1) +
                             at_int(y + 1, x) - at_int(y, x);
    }
  }

  const double count = double(cfg.window) * double(cfg.window);
  Image8 mask(img.h, img.w);
  for (Index y = 0; y < img.h; ++y)
    for (Index x = 0; x < img.w; ++x) {
      const Index y0 = y, x0 = x;  // padded coordinates of the window corner
      const std::int64_t sum = at_int(y0 + cfg.window, x0 + cfg.window) -
                               at_int(y0, x0 + cfg.window) -
                               at_int(y0 + cfg.window, x0) + at_int(y0, x0);
      const double mean = double(sum) / count;
      mask.at(y, x) = double(img.at(y, x)) > mean + cfg.offset ? 255 : 0;
    }
  return mask;
}

Image8 threshold_image(const Image8& img, const ThresholdConfig& cfg) {
  return cfg.method == ThresholdConfig::Method::otsu
             ? otsu_threshold(img)
             : local_mean_threshold(img, cfg);
}

}  // namespace svs
