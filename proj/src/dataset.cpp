#include "svs/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

namespace svs {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sample_filename(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d.png", id);
  return buf;
}

namespace {

// decorrelates per-scene seeds from the dataset seed
std::uint64_t scene_seed(std::uint64_t dataset_seed, int index) {
  std::uint64_t z = dataset_seed + 0x9E3779B97F4A7C15ull * (std::uint64_t(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::filesystem::path generate_dataset(const SceneConfig& cfg, int count,
                                       const fs::path& out_dir) {
  require(count >= 2, "dataset needs at least 2 scenes for a split, got ",
          count);
  cfg.validate();
  std::error_code ec;
  for (const char* sub : {"images", "masks", "regions"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec)
      throw io_error(strcat("cannot create ", (out_dir / sub).string(), ": ",
                            ec.message()));
  }

  DatasetManifest manifest;
  manifest.size = cfg.size;
  manifest.seed = cfg.seed;
  for (int i = 0; i < count; ++i) {
    SceneConfig sc = cfg;
    sc.seed = scene_seed(cfg.seed, i);
    const Scene scene = generate_scene(sc);
    const std::string name = sample_filename(i);
    write_png(out_dir / "images" / name, scene.image);
    write_png(out_dir / "masks" / name, scene.mask);
    write_png(out_dir / "regions" / name, scene.np_region);
    if (i < count / 2)
      manifest.train.push_back(i);
    else
      manifest.test.push_back(i);
  }
  write_manifest(out_dir, manifest);
  return out_dir / "manifest.json";
}

void write_manifest(const fs::path& root, const DatasetManifest& m) {
  json j;
  j["size"] = m.size;
  j["seed"] = m.seed;
  j["train"] = m.train;
  j["test"] = m.test;
  std::ofstream out(root / "manifest.json");
  if (!out)
    throw io_error(strcat("cannot write ", (root / "manifest.json").string()));
  out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const fs::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in)
    throw io_error(strcat("cannot read ", (root / "manifest.json").string()));
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw io_error(strcat("malformed manifest: ", e.what()));
  }
  DatasetManifest m;
  m.size = j.at("size").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.train = j.at("train").get<std::vector<int>>();
  m.test = j.at("test").get<std::vector<int>>();
  return m;
}

Scene load_sample(const fs::path& root, int id) {
  const std::string name = sample_filename(id);
  Scene s;
  s.image = read_png(root / "images" / name);
  s.mask = read_png(root / "masks" / name);
  s.np_region = read_png(root / "regions" / name);
  require(is_binary_mask(s.mask), "mask ", name, " is not binary");
  require(is_binary_mask(s.np_region), "region ", name, " is not binary");
  return s;
}

std::vector<Scene> load_split(const fs::path& root,
                              const std::vector<int>& ids) {
  std::vector<Scene> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(load_sample(root, id));
  return out;
}

}  // namespace svs
