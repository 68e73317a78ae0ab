// Acceptance suite: eight end-to-end criteria, one PASS/FAIL line each.
// Runs the real pipeline (dataset on disk, training loop, baselines) at desk
// scale. Exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "svs/augment.hpp"
#include "svs/checkpoint.hpp"
#include "svs/dataset.hpp"
#include "svs/metrics.hpp"
#include "svs/network.hpp"
#include "svs/threshold.hpp"
#include "svs/trainer.hpp"

using namespace svs;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void criterion(int n, const char* name, bool ok, const std::string& details) {
  std::printf("%s: criterion %d — %s (%s)\n", ok ? "PASS" : "FAIL", n, name,
              details.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

// ---------------------------------------------------------------------------
// 1. full-network finite-difference gradient check (depth 2, 16x16, 64-bit)
void criterion_gradient_check() {
  const auto t0 = Clock::now();
  NetworkConfig cfg;
  cfg.base_channels = 2;  // width is free; depth/input are pinned
  cfg.depth = 2;
  cfg.input_size = 16;
  cfg.seed = 7;
  SvsNet<double> net(cfg);
  RenderOptions render;
  render.truncated = false;  // smooth everywhere; no truncation boundary

  // Jitter the zero-initialized biases to a generic point: dead-relu patches
  // otherwise put conv outputs exactly at their bias, parking a relu kink on
  // the evaluation point, where a central difference is not an oracle.
  {
    std::mt19937_64 jrng(cfg.seed + 1000);
    std::uniform_real_distribution<double> jit(-0.05, 0.05);
    for (const auto& [name, v] : net.named_parameters())
      if (name.ends_with(".b"))
        for (Index i = 0; i < v->value.size(); ++i)
          v->value.data()[i] += jit(jrng);
  }

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor<double> image(Shape{1, 16, 16, 1});
  for (Index i = 0; i < image.size(); ++i) image.data()[i] = unit(rng);
  Tensor<double> mask(Shape{1, 16, 16, 1});
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = double(rng() % 2);

  auto loss_value = [&]() {
    Tape<double> tape;
    auto fwd = net.forward(tape, make_leaf(image, false), render);
    auto m = make_leaf(mask, false);
    auto loss = add(tape, cross_entropy(tape, fwd.final_prob, m),
                    scale(tape, cross_entropy(tape, fwd.backbone_prob, m),
                          cfg.aux_loss_weight));
    return loss;
  };

  auto params = net.parameters();
  for (auto& p : params) zero_grad(p);
  {
    Tape<double> tape;
    auto fwd = net.forward(tape, make_leaf(image, false), render);
    auto m = make_leaf(mask, false);
    auto loss = add(tape, cross_entropy(tape, fwd.final_prob, m),
                    scale(tape, cross_entropy(tape, fwd.backbone_prob, m),
                          cfg.aux_loss_weight));
    tape.backward(loss);
  }

  const double h = 1e-4;
  long checked = 0, failed = 0, kink_refined = 0;
  for (auto& p : params)
    for (Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      auto fd_at = [&](double hh) {
        p->value.data()[i] = saved + hh;
        const double fp = loss_value()->value.data()[0];
        p->value.data()[i] = saved - hh;
        const double fm = loss_value()->value.data()[0];
        p->value.data()[i] = saved;
        return (fp - fm) / (2.0 * hh);
      };
      const double analytic = p->grad.data()[i];
      auto within = [&](double numeric) {
        return std::abs(analytic - numeric) <= 1e-6 + 1e-3 * std::abs(numeric);
      };
      ++checked;
      if (within(fd_at(h))) continue;
      // A relu kink inside the +-h window invalidates the difference itself;
      // shrink the step until the window is clean, tolerance unchanged.
      bool ok = false;
      for (double hh = h / 2; hh > 9e-7; hh /= 2)
        if (within(fd_at(hh))) {
          ok = true;
          ++kink_refined;
          break;
        }
      if (!ok) ++failed;
    }
  const double secs = seconds_since(t0);
  criterion(1, "full-network gradient check", failed == 0 && secs < 60.0,
            strcat(checked, " parameters, ", failed, " failures, ",
                   kink_refined, " needed a kink-refined step, ", secs,
                   " s (< 60 s)"));
}

// ---------------------------------------------------------------------------
// 2. renderer analytic oracles
void criterion_renderer_oracles() {
  Tensor<double> p(Shape{1, 17, 17, 6});
  for (Index i = 0; i < 17; ++i)
    for (Index j = 0; j < 17; ++j) {
      p.at(0, i, j, kMuX) = double(j);
      p.at(0, i, j, kMuY) = double(i);
      p.at(0, i, j, kSigmaX) = 1.0;
      p.at(0, i, j, kSigmaY) = 1.0;
      p.at(0, i, j, kRho) = 0.0;  // verification mode
    }
  p.at(0, 8, 8, kConf) = 1.0;
  RenderOptions exact;
  exact.truncated = false;
  exact.verification = true;
  const auto r = render_attention(p, exact);
  const double peak = 1.0 / (2.0 * std::numbers::pi);
  const double off = peak * std::exp(-0.5);
  const double e_peak = std::abs(r.sum.at(0, 8, 8, 0) - peak);
  const double e_off = std::abs(r.sum.at(0, 8, 9, 0) - off);

  RenderOptions t5;
  t5.cutoff_k = 5.0;
  t5.verification = true;
  const auto rt = render_attention(p, t5);
  const double e_trunc =
      (r.attention.array() - rt.attention.array()).abs().maxCoeff();

  criterion(2, "renderer analytic oracles",
            e_peak < 1e-9 && e_off < 1e-9 && e_trunc < 1e-5,
            strcat("peak err ", e_peak, ", 1-sigma err ", e_off,
                   ", truncated(5) vs exact ", e_trunc));
}

// ---------------------------------------------------------------------------
// 3. metric suite vs an independent high-precision re-evaluation
void criterion_metrics() {
  std::mt19937 rng(271828);
  std::uniform_int_distribution<std::int64_t> count(0, 100000);
  long bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionCounts c{count(rng), count(rng), count(rng), count(rng)};
    if (c.total() == 0) c.tn = 1;
    const MetricsReport r = compute_metrics(c);
    const long double TP = c.tp, TN = c.tn, FP = c.fp, FN = c.fn;
    const long double total = TP + TN + FP + FN;
    auto close = [](std::optional<double> a, long double b) {
      return a && std::abs(*a - double(b)) <= 1e-12;
    };
    if (!close(r.accuracy, (TP + TN) / total)) ++bad;
    if (c.tp + c.fp > 0 && !close(r.fdr, FP / (TP + FP))) ++bad;
    if (c.tp + c.fn > 0 && !close(r.recall, TP / (TP + FN))) ++bad;
    if (c.tn + c.fp > 0 && !close(r.specificity, TN / (TN + FP))) ++bad;
    const long double pe =
        ((TP + FN) * (TP + FP) + (TN + FP) * (TN + FN)) / (total * total);
    if (!close(r.pe, pe)) ++bad;
    if (pe != 1.0L &&
        !close(r.kappa, ((TP + TN) / total - pe) / (1.0L - pe)))
      ++bad;
    if (c.tp + c.fn > 0 && c.tn + c.fp > 0) {
      const long double rec = TP / (TP + FN), spec = TN / (TN + FP);
      if (!close(r.auc, (rec + spec) / 2.0L)) ++bad;
      if (!close(r.g_means, std::sqrt(rec * spec))) ++bad;
    }
  }
  const MetricsReport worked = compute_metrics({50, 30, 10, 10});
  const bool worked_ok =
      *worked.kappa == (0.80 - 0.52) / (1.0 - 0.52) &&
      std::abs(*worked.kappa - 0.583333) < 1e-6;
  const MetricsReport perfect = compute_metrics({40, 60, 0, 0});
  const bool perfect_ok = *perfect.kappa == 1.0 && *perfect.fdr == 0.0;
  criterion(3, "metric suite vs independent re-evaluation",
            bad == 0 && worked_ok && perfect_ok,
            strcat("1000 quadruples, ", bad,
                   " mismatches; worked kappa = ", *worked.kappa,
                   "; perfect kappa/fdr = ", *perfect.kappa, "/",
                   *perfect.fdr));
}

// ---------------------------------------------------------------------------
// 4. clinical reference values are documentation only
void criterion_reference_values() {
  criterion(4, "clinical reference metrics are documentation-only", true,
            "accuracy 0.865, recall 0.755, f1 0.781, kappa 0.681 ship in the "
            "README as reference targets; the private clinical corpus is "
            "unavailable, so no test asserts them");
}

struct TrainedSetup {
  fs::path data_dir;
  std::vector<Scene> test_scenes;
  SvsNet<float> net;
  std::vector<LossRow> log;
  double secs_300 = 0;
  bool numeric_failure = false;
  std::string error;
};

// One deterministic desk session; criterion 5 reads the 300-step prefix,
// criterion 6 evaluates the final model.
TrainedSetup train_desk_session(int total_steps) {
  TrainedSetup s{fs::temp_directory_path() / "svs_acceptance_data",
                 {},
                 SvsNet<float>(NetworkConfig{16, 3, 64, 0.5, 7}),
                 {},
                 0,
                 false,
                 ""};
  fs::remove_all(s.data_dir);
  SceneConfig scfg;
  scfg.size = 64;
  scfg.seed = 7;
  generate_dataset(scfg, 60, s.data_dir);
  const DatasetManifest manifest = read_manifest(s.data_dir);
  const std::vector<Scene> train = load_split(s.data_dir, manifest.train);
  s.test_scenes = load_split(s.data_dir, manifest.test);

  TrainingConfig tc;
  tc.lr = 1e-3;  // desk preset
  tc.batch_size = 2;
  tc.iterations = total_steps;
  tc.seed = 7;
  AdamState<float> opt;
  opt.lr = tc.lr;
  opt.init(s.net.parameters());
  const auto t0 = Clock::now();
  try {
    s.log = run_training(s.net, opt, train, tc, {},
                         [&](const LossRow& row) {
                           if (row.step == 300) s.secs_300 = seconds_since(t0);
                         });
  } catch (const numeric_error& e) {
    s.numeric_failure = true;
    s.error = e.what();
  }
  return s;
}

double median_of(const std::vector<LossRow>& log, std::size_t begin,
                 std::size_t end) {
  std::vector<double> v;
  for (std::size_t i = begin; i < end && i < log.size(); ++i)
    v.push_back(log[i].loss);
  std::sort(v.begin(), v.end());
  return v.empty() ? std::nan("") : v[v.size() / 2];
}

// FDR over np-restricted counts; no discoveries counts as zero.
double np_fdr(const std::vector<ConfusionCounts>& np_counts,
              std::int64_t* discoveries = nullptr) {
  ConfusionCounts sum;
  for (const auto& c : np_counts) sum += c;
  if (discoveries) *discoveries = sum.tp + sum.fp;
  if (sum.tp + sum.fp == 0) return 0.0;
  return double(sum.fp) / double(sum.tp + sum.fp);
}

void criterion_training_and_fig2(const TrainedSetup& s) {
  // 5: training smoke on the 300-step prefix
  if (s.numeric_failure || s.log.size() < 300) {
    criterion(5, "desk training smoke", false,
              strcat("training aborted: ", s.error));
    criterion(6, "speckle suppression vs baselines", false,
              "no trained model");
    return;
  }
  const double first = median_of(s.log, 0, 50);
  const double last = median_of(s.log, 250, 300);
  const double ratio = last / first;
  criterion(5, "desk training smoke (300 steps, seed 7)",
            ratio <= 0.6 && s.secs_300 < 600.0 && !s.numeric_failure,
            strcat("median first-50 ", first, ", last-50 ", last, ", ratio ",
                   ratio, " (<= 0.6); ", s.secs_300,
                   " s (< 600); NaN/Inf events: 0"));

  // 6: Fig-2 property on the final model of the same session
  std::vector<ConfusionCounts> model_all, otsu_all, local_all;
  std::vector<ConfusionCounts> model_np, otsu_np, local_np;
  ThresholdConfig local_cfg;
  local_cfg.method = ThresholdConfig::Method::local_mean;
  for (const Scene& scene : s.test_scenes) {
    const Image8 pred =
        predict_mask(s.net, image_to_tensor<float>(scene.image));
    const Image8 om = otsu_threshold(scene.image);
    const Image8 lm = local_mean_threshold(scene.image, local_cfg);
    model_all.push_back(confusion_from_masks(pred, scene.mask));
    otsu_all.push_back(confusion_from_masks(om, scene.mask));
    local_all.push_back(confusion_from_masks(lm, scene.mask));
    const auto add_np = [&](std::vector<ConfusionCounts>& dst,
                            const Image8& m) {
      const auto c = confusion_from_masks(m, scene.mask, &scene.np_region);
      if (c.total() > 0) dst.push_back(c);
    };
    add_np(model_np, pred);
    add_np(otsu_np, om);
    add_np(local_np, lm);
  }
  std::int64_t model_disc = 0, otsu_disc = 0, local_disc = 0;
  const double fdr_model = np_fdr(model_np, &model_disc);
  const double fdr_otsu = np_fdr(otsu_np, &otsu_disc);
  const double fdr_local = np_fdr(local_np, &local_disc);
  const double f1_model =
      aggregate(model_all, Aggregate::micro).f1.value_or(-1);
  const double f1_otsu = aggregate(otsu_all, Aggregate::micro).f1.value_or(-1);
  const double f1_local =
      aggregate(local_all, Aggregate::micro).f1.value_or(-1);

  const bool fdr_ok = otsu_disc > 0 && local_disc > 0 &&
                      fdr_model < fdr_otsu && fdr_model < fdr_local;
  const bool f1_ok = f1_model >= f1_otsu && f1_model >= f1_local;
  criterion(6,
            strcat("speckle suppression vs baselines (", s.log.size(),
                   "-step session)")
                .c_str(),
            fdr_ok && f1_ok,
            strcat("np FDR model/otsu/local ", fdr_model, "/", fdr_otsu, "/",
                   fdr_local, " (discoveries ", model_disc, "/", otsu_disc,
                   "/", local_disc, "); F1 ", f1_model, "/", f1_otsu, "/",
                   f1_local));
}

// ---------------------------------------------------------------------------
// 7. determinism and round-trips
void criterion_determinism(const TrainedSetup& s) {
  bool ok = true;
  std::string notes;

  // datasets
  const fs::path d1 = fs::temp_directory_path() / "svs_acc_det1";
  const fs::path d2 = fs::temp_directory_path() / "svs_acc_det2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  SceneConfig scfg;
  scfg.seed = 13;
  generate_dataset(scfg, 6, d1);
  generate_dataset(scfg, 6, d2);
  for (int i = 0; i < 6 && ok; ++i)
    for (const char* sub : {"images", "masks", "regions"})
      if (slurp(d1 / sub / sample_filename(i)) !=
          slurp(d2 / sub / sample_filename(i))) {
        ok = false;
        notes += "dataset bytes differ; ";
      }

  // training runs: loss logs and checkpoints
  const DatasetManifest m = read_manifest(d1);
  const auto train_scenes = load_split(d1, m.train);
  auto short_run = [&](const fs::path& ckpt) {
    SvsNet<float> net(NetworkConfig{8, 2, 64, 0.5, 3});
    AdamState<float> opt;
    opt.lr = 1e-3;
    opt.init(net.parameters());
    TrainingConfig tc;
    tc.iterations = 25;
    tc.seed = 3;
    const auto log = run_training(net, opt, train_scenes, tc);
    save_checkpoint(ckpt, net);
    return log;
  };
  const auto l1 = short_run(d1 / "a.ckpt");
  const auto l2 = short_run(d1 / "b.ckpt");
  bool logs_equal = l1.size() == l2.size();
  for (std::size_t i = 0; logs_equal && i < l1.size(); ++i)
    logs_equal = l1[i].loss == l2[i].loss && l1[i].aux_loss == l2[i].aux_loss;
  if (!logs_equal) {
    ok = false;
    notes += "loss curves differ; ";
  }
  if (slurp(d1 / "a.ckpt") != slurp(d1 / "b.ckpt")) {
    ok = false;
    notes += "checkpoints differ; ";
  }

  // checkpoint save -> load -> forward is bit-identical
  const fs::path ck = d1 / "trained.ckpt";
  save_checkpoint(ck, s.net);
  const SvsNet<float> reloaded = load_checkpoint(ck);
  const Tensor<float> probe =
      image_to_tensor<float>(s.test_scenes.front().image);
  const auto r1 = infer(s.net, probe);
  const auto r2 = infer(reloaded, probe);
  if (!(r1.final_prob.array() == r2.final_prob.array()).all() ||
      !(r1.attention.array() == r2.attention.array()).all()) {
    ok = false;
    notes += "reloaded forward differs; ";
  }

  // rendered PNG determinism
  const Image8 att_png = tensor_to_image(r1.attention);
  const fs::path p1 = d1 / "att1.png", p2 = d1 / "att2.png";
  write_png(p1, att_png);
  write_png(p2, att_png);
  if (slurp(p1) != slurp(p2)) {
    ok = false;
    notes += "png bytes differ; ";
  }

  // flip-flip identity and zero-pad/full-crop identity
  const Scene& sc = s.test_scenes.front();
  {
    AugmentRng rng(5);
    // apply the same concrete flips twice by reusing one probe rng per pass
    for (unsigned seed = 0; seed < 64; ++seed) {
      AugmentRng probe_rng(seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const bool h = unit(probe_rng) < 0.5, v = unit(probe_rng) < 0.5;
      if (!h || v) continue;
      AugmentRng ra(seed), rb(seed);
      auto [i1, m1] = random_flip(sc.image, sc.mask, ra);
      auto [i2, m2] = random_flip(i1, m1, rb);
      if (!(i2 == sc.image && m2 == sc.mask)) {
        ok = false;
        notes += "flip-flip not identity; ";
      }
      break;
    }
    AugmentConfig ac;
    ac.pad_fraction_max = 0.0;
    ac.crop_size = int(sc.image.w);
    auto [ci, cm] = pad_and_crop(sc.image, sc.mask, rng, ac);
    if (!(ci == sc.image && cm == sc.mask)) {
      ok = false;
      notes += "zero-pad/full-crop not identity; ";
    }
  }
  criterion(7, "determinism and round-trips", ok,
            ok ? "datasets, loss logs, checkpoints, reloaded forwards, png "
                 "bytes, flip and crop identities all byte-stable"
               : notes);
}

// ---------------------------------------------------------------------------
// 8. augmentation statistics
void criterion_augmentation_stats() {
  AugmentRng rng(7);
  const Image8 base(256, 256, 128);
  const Image8 noisy = add_gaussian_noise(base, 10.0, rng);
  double sum = 0, sum2 = 0;
  const double n = 256.0 * 256.0;
  for (auto p : noisy.px) {
    const double d = double(p) - 128.0;
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum2 / n - mean * mean);

  // full pipeline keeps outputs in range and masks binary
  SceneConfig scfg;
  scfg.seed = 31;
  const Scene scene = generate_scene(scfg);
  AugmentConfig ac;
  ac.crop_size = 64;
  bool binary_ok = true;
  for (int trial = 0; trial < 25; ++trial) {
    AugmentRng arng(derive_stream(31, std::uint64_t(trial)));
    auto [img, msk] = compose_pipeline(scene.image, scene.mask, ac, arng);
    binary_ok = binary_ok && is_binary_mask(msk) && img.h == 64 &&
                img.w == 64;  // u8 storage bounds the range by construction
  }
  criterion(8, "augmentation statistics",
            std::abs(mean) <= 0.5 && stddev >= 9.0 && stddev <= 11.0 &&
                binary_ok,
            strcat("sigma-10 noise: mean shift ", mean, ", std ", stddev,
                   " (in [9,11]); masks binary through the pipeline: ",
                   binary_ok ? "yes" : "no"));
}

}  // namespace

int main() {
  std::printf("acceptance suite — desk-scale end-to-end checks\n");
  const auto t0 = Clock::now();

  criterion_gradient_check();
  criterion_renderer_oracles();
  criterion_metrics();
  criterion_reference_values();
  const TrainedSetup session = train_desk_session(900);
  criterion_training_and_fig2(session);
  criterion_determinism(session);
  criterion_augmentation_stats();

  std::printf("%s — %d criterion(s) failed, total %.1f s\n",
              g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures,
              seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
