#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "svs/synth.hpp"

namespace svs {

// On-disk layout: <root>/images/NNNN.png, <root>/masks/NNNN.png,
// <root>/regions/NNNN.png, <root>/manifest.json.
struct DatasetManifest {
  int size = 0;
  std::uint64_t seed = 0;
  std::vector<int> train;
  std::vector<int> test;
};

std::string sample_filename(int id);

// Writes count scenes and a manifest with a 50/50 train/test split
// (first half train). Returns the manifest path.
std::filesystem::path generate_dataset(const SceneConfig& cfg, int count,
                                       const std::filesystem::path& out_dir);

DatasetManifest read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root,
                    const DatasetManifest& m);

Scene load_sample(const std::filesystem::path& root, int id);
std::vector<Scene> load_split(const std::filesystem::path& root,
                              const std::vector<int>& ids);

}  // namespace svs
