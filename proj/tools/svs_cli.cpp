// Command-line entry point: dataset synthesis, training, evaluation,
// thresholding baselines, and attention rendering, all reproducible from
// (flags, config file, input bytes).
//
// Exit codes: 0 success, 2 argument error, 3 I/O error, 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "svs/checkpoint.hpp"
#include "svs/dataset.hpp"
#include "svs/metrics.hpp"
#include "svs/network.hpp"
#include "svs/threshold.hpp"
#include "svs/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Preset {
  double lr;
  int batch_size;
  int input_size;
};

Preset preset_named(const std::string& name) {
  if (name == "desk") return {1e-3, 2, 64};
  if (name == "paper") return {1e-5, 2, 304};
  throw svs::contract_error(svs::strcat("unknown preset '", name,
                                        "' (expected desk or paper)"));
}

void write_loss_csv(const fs::path& path, const std::vector<svs::LossRow>& log) {
  std::ofstream out(path);
  if (!out) throw svs::io_error(svs::strcat("cannot write ", path.string()));
  out << "step,loss,aux_loss\n";
  char buf[96];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", row.step, row.loss,
                  row.aux_loss);
    out << buf;
  }
}

struct EvalAccumulator {
  std::vector<svs::ConfusionCounts> whole;
  std::vector<svs::ConfusionCounts> np;  // only images with np pixels

  void add(const svs::Image8& pred, const svs::Scene& scene, bool with_np) {
    whole.push_back(svs::confusion_from_masks(pred, scene.mask));
    if (with_np) {
      const auto c =
          svs::confusion_from_masks(pred, scene.mask, &scene.np_region);
      if (c.total() > 0) np.push_back(c);
    }
  }

  json to_json(bool with_np) const {
    json j;
    j["images"] = whole.size();
    j["micro"] = svs::report_to_json(svs::aggregate(whole, svs::Aggregate::micro));
    j["macro"] = svs::report_to_json(svs::aggregate(whole, svs::Aggregate::macro));
    if (with_np) {
      if (np.empty()) {
        j["np_region"] = nullptr;  // no non-perfusion pixels in the split
      } else {
        j["np_region"]["images"] = np.size();
        j["np_region"]["micro"] =
            svs::report_to_json(svs::aggregate(np, svs::Aggregate::micro));
        j["np_region"]["macro"] =
            svs::report_to_json(svs::aggregate(np, svs::Aggregate::macro));
      }
    }
    return j;
  }
};

void write_report(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw svs::io_error(svs::strcat("cannot write ", path.string()));
  out << j.dump(2) << "\n";
}

int cmd_synth(const fs::path& out_dir, int count, int size,
              std::uint64_t seed) {
  svs::SceneConfig cfg;
  cfg.size = size;
  cfg.seed = seed;
  const fs::path manifest = svs::generate_dataset(cfg, count, out_dir);
  std::cout << manifest.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& data, const std::string& preset_name, int iters,
              std::uint64_t seed, const fs::path& out_ckpt,
              fs::path loss_log, bool no_aux, bool no_augment) {
  const Preset preset = preset_named(preset_name);
  const svs::DatasetManifest manifest = svs::read_manifest(data);
  const std::vector<svs::Scene> train = svs::load_split(data, manifest.train);

  svs::NetworkConfig ncfg;
  ncfg.input_size = preset.input_size;
  ncfg.seed = seed;
  if (no_aux) ncfg.aux_loss_weight = 0.0;
  svs::TrainingConfig tcfg;
  tcfg.lr = preset.lr;
  tcfg.batch_size = preset.batch_size;
  tcfg.iterations = iters;
  tcfg.seed = seed;
  tcfg.augment = !no_augment;

  svs::SvsNet<float> net(ncfg);
  svs::AdamState<float> opt;
  opt.lr = tcfg.lr;
  opt.init(net.parameters());
  const auto log = svs::run_training(net, opt, train, tcfg);

  if (loss_log.empty()) loss_log = out_ckpt.string() + ".loss.csv";
  write_loss_csv(loss_log, log);
  svs::save_checkpoint(out_ckpt, net);
  std::cout << "trained " << iters << " steps; checkpoint " << out_ckpt.string()
            << "; loss log " << loss_log.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& data, const fs::path& ckpt, const fs::path& pred,
             const fs::path& report, bool region_np) {
  svs::require(ckpt.empty() != pred.empty(),
          "exactly one of --ckpt or --pred is required");
  const svs::DatasetManifest manifest = svs::read_manifest(data);
  svs::require(!manifest.test.empty(), "dataset has an empty test split");

  EvalAccumulator acc;
  if (!pred.empty()) {
    for (int id : manifest.test) {
      const svs::Scene scene = svs::load_sample(data, id);
      const svs::Image8 mask = svs::read_png(pred / svs::sample_filename(id));
      acc.add(mask, scene, region_np);
    }
  } else {
    const svs::SvsNet<float> net = svs::load_checkpoint(ckpt);
    for (int id : manifest.test) {
      const svs::Scene scene = svs::load_sample(data, id);
      acc.add(svs::predict_mask(net, svs::image_to_tensor<float>(scene.image)),
              scene, region_np);
    }
  }
  const json j = acc.to_json(region_np);
  write_report(report, j);
  std::cout << "evaluated " << acc.whole.size() << " images; micro f1 "
            << j["micro"]["f1"].dump() << "; report " << report.string()
            << "\n";
  return 0;
}

int cmd_baseline(const fs::path& data, const std::string& method,
                 const fs::path& report, fs::path masks_out, bool region_np) {
  svs::ThresholdConfig cfg;
  if (method == "otsu")
    cfg.method = svs::ThresholdConfig::Method::otsu;
  else if (method == "local")
    cfg.method = svs::ThresholdConfig::Method::local_mean;
  else
    throw svs::contract_error(
        svs::strcat("unknown method '", method, "' (expected otsu or local)"));

  const svs::DatasetManifest manifest = svs::read_manifest(data);
  svs::require(!manifest.test.empty(), "dataset has an empty test split");
  if (masks_out.empty())
    masks_out = (report.has_parent_path() ? report.parent_path() : ".") /
                (method + "_masks");
  std::error_code ec;
  fs::create_directories(masks_out, ec);
  if (ec)
    throw svs::io_error(
        svs::strcat("cannot create ", masks_out.string(), ": ", ec.message()));

  EvalAccumulator acc;
  for (int id : manifest.test) {
    const svs::Scene scene = svs::load_sample(data, id);
    const svs::Image8 mask = svs::threshold_image(scene.image, cfg);
    svs::write_png(masks_out / svs::sample_filename(id), mask);
    acc.add(mask, scene, region_np);
  }
  const json j = acc.to_json(region_np);
  write_report(report, j);
  std::cout << method << " over " << acc.whole.size() << " images; micro f1 "
            << j["micro"]["f1"].dump() << "; masks " << masks_out.string()
            << "; report " << report.string() << "\n";
  return 0;
}

int cmd_render(const fs::path& ckpt, const fs::path& image_path,
               const fs::path& out_dir) {
  const svs::SvsNet<float> net = svs::load_checkpoint(ckpt);
  const svs::Image8 image = svs::read_png(image_path);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw svs::io_error(
        svs::strcat("cannot create ", out_dir.string(), ": ", ec.message()));
  const auto r = svs::infer(net, svs::image_to_tensor<float>(image));
  svs::write_png(out_dir / "backbone_prob.png", svs::tensor_to_image(r.backbone_prob));
  svs::write_png(out_dir / "attention.png", svs::tensor_to_image(r.attention));
  svs::write_png(out_dir / "final_prob.png", svs::tensor_to_image(r.final_prob));
  svs::write_png(out_dir / "mask.png", svs::binarize(r.final_prob));
  std::cout << "wrote backbone_prob.png attention.png final_prob.png mask.png"
            << " to " << out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic OCTA vessel segmentation toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags take precedence");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  fs::path synth_out;
  int synth_count = 60, synth_size = 64;
  std::uint64_t synth_seed = 7;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--count", synth_count, "number of scenes (>= 2)");
  synth->add_option("--size", synth_size, "image size in pixels");
  synth->add_option("--seed", synth_seed, "dataset seed");

  // train
  auto* train = app.add_subcommand("train", "train on a dataset's train split");
  fs::path train_data, train_out, train_loss_log;
  std::string train_preset = "desk";
  int train_iters = 300;
  std::uint64_t train_seed = 7;
  bool no_aux = false, no_augment = false;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--preset", train_preset, "desk (lr 1e-3, 64px) or paper (lr 1e-5, 304px)");
  train->add_option("--iters", train_iters, "training steps");
  train->add_option("--seed", train_seed, "initialization and sampling seed");
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--loss-log", train_loss_log, "loss CSV path (default <out>.loss.csv)");
  train->add_flag("--no-aux", no_aux, "drop the backbone supervision term");
  train->add_flag("--no-augment", no_augment, "train on raw crops");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate on the test split");
  fs::path eval_data, eval_ckpt, eval_pred, eval_report;
  std::string eval_region;
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--ckpt", eval_ckpt, "checkpoint to evaluate");
  eval->add_option("--pred", eval_pred, "directory of predicted masks (tool mode)");
  eval->add_option("--report", eval_report, "report JSON path")->required();
  eval->add_option("--region", eval_region, "also restrict to a region: np");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "threshold baselines");
  fs::path base_data, base_report, base_masks;
  std::string base_method = "otsu", base_region;
  baseline->add_option("--data", base_data, "dataset directory")->required();
  baseline->add_option("--method", base_method, "otsu or local");
  baseline->add_option("--report", base_report, "report JSON path")->required();
  baseline->add_option("--masks-out", base_masks, "mask output directory");
  baseline->add_option("--region", base_region, "also restrict to a region: np");

  // render
  auto* render = app.add_subcommand("render", "render the stage outputs");
  fs::path render_ckpt, render_image, render_out;
  render->add_option("--ckpt", render_ckpt, "checkpoint")->required();
  render->add_option("--image", render_image, "input grayscale PNG")->required();
  render->add_option("--out", render_out, "output directory")->required();

  try {
    app.parse(argc, argv);
    if (*synth) return cmd_synth(synth_out, synth_count, synth_size, synth_seed);
    if (*train)
      return cmd_train(train_data, train_preset, train_iters, train_seed,
                       train_out, train_loss_log, no_aux, no_augment);
    if (*eval) {
      svs::require(eval_region.empty() || eval_region == "np",
              "unknown region '", eval_region, "' (expected np)");
      return cmd_eval(eval_data, eval_ckpt, eval_pred, eval_report,
                      eval_region == "np");
    }
    if (*baseline) {
      svs::require(base_region.empty() || base_region == "np",
              "unknown region '", base_region, "' (expected np)");
      return cmd_baseline(base_data, base_method, base_report, base_masks,
                          base_region == "np");
    }
    if (*render) return cmd_render(render_ckpt, render_image, render_out);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const svs::contract_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const svs::io_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const svs::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  }
}
