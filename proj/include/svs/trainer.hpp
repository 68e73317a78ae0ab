#pragma once

#include <functional>
#include <vector>

#include "svs/augment.hpp"
#include "svs/checkpoint.hpp"
#include "svs/network.hpp"
#include "svs/synth.hpp"

namespace svs {

struct TrainingConfig {
  double lr = 1e-3;       // desk preset; the full-scale preset uses 1e-5
  int batch_size = 2;
  int iterations = 300;
  std::uint64_t seed = 7;
  bool augment = true;

  void validate() const {
    require(lr > 0.0, "learning rate must be > 0, got ", lr);
    require(batch_size >= 1, "batch_size must be >= 1, got ", batch_size);
    require(iterations >= 0, "iterations must be >= 0, got ", iterations);
  }
};

struct LossRow {
  int step = 0;       // 1-based
  double loss = 0;    // ce_final + aux_weight * ce_backbone
  double aux_loss = 0;  // ce_backbone
};

// decorrelated per-(seed, step, slot) stream
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (a + 1) +
                    0x94D049BB133111EBull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Assembles one training batch: samples train-split indices, runs the
// augmentation pipeline per slot, scales to [0,1] / {0,1} tensors.
inline void fill_batch(const std::vector<Scene>& scenes, int step,
                       const TrainingConfig& tc, const AugmentConfig& ac,
                       Tensor<float>& images, Tensor<float>& masks) {
  const Shape s = images.shape();
  AugmentRng pick(derive_stream(tc.seed, std::uint64_t(step)));
  for (Index k = 0; k < s.b; ++k) {
    const auto& scene = scenes[pick() % scenes.size()];
    AugmentRng arng(
        derive_stream(tc.seed, std::uint64_t(step), std::uint64_t(k) + 1));
    auto [img, msk] = compose_pipeline(scene.image, scene.mask, ac, arng);
    require(img.h == s.h && img.w == s.w, "augmented sample is ", img.h, "x",
            img.w, ", expected ", s.h, "x", s.w);
    for (Index i = 0; i < s.h * s.w; ++i) {
      images.data()[k * s.h * s.w + i] = float(img.px[std::size_t(i)]) / 255.0f;
      masks.data()[k * s.h * s.w + i] = msk.px[std::size_t(i)] ? 1.0f : 0.0f;
    }
  }
}

// Runs `tc.iterations` steps of the deterministic training loop, appending
// one LossRow per step. A non-finite loss aborts with the failing step named.
inline std::vector<LossRow> run_training(
    SvsNet<float>& net, AdamState<float>& opt,
    const std::vector<Scene>& train_scenes, const TrainingConfig& tc,
    const RenderOptions& render = {},
    const std::function<void(const LossRow&)>& on_step = nullptr) {
  tc.validate();
  require(!train_scenes.empty(), "run_training: empty training split");
  const int size = net.config().input_size;
  AugmentConfig ac;
  ac.crop_size = size;
  ac.enabled = tc.augment;

  std::vector<LossRow> log;
  log.reserve(std::size_t(tc.iterations));
  Tensor<float> images(Shape{tc.batch_size, size, size, 1});
  Tensor<float> masks(Shape{tc.batch_size, size, size, 1});
  for (int step = 0; step < tc.iterations; ++step) {
    fill_batch(train_scenes, step, tc, ac, images, masks);
    StepResult<float> r;
    try {
      r = train_step(net, images, masks, opt, render);
    } catch (const numeric_error& e) {
      throw numeric_error(
          strcat("training step ", step + 1, " failed: ", e.what()));
    }
    LossRow row{step + 1, r.loss, r.ce_backbone};
    log.push_back(row);
    if (on_step) on_step(row);
  }
  return log;
}

}  // namespace svs
