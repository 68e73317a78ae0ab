#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "svs/dataset.hpp"
#include "svs/synth.hpp"

using namespace svs;
namespace fs = std::filesystem;

namespace {

double vessel_fraction(const Image8& mask) {
  double n = 0;
  for (auto p : mask.px) n += p ? 1 : 0;
  return n / double(mask.px.size());
}

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("identical seeds give bit-identical scenes") {
  SceneConfig cfg;
  cfg.seed = 99;
  const Scene a = generate_scene(cfg);
  const Scene b = generate_scene(cfg);
  CHECK(a.image == b.image);
  CHECK(a.mask == b.mask);
  CHECK(a.np_region == b.np_region);
  cfg.seed = 100;
  const Scene c = generate_scene(cfg);
  CHECK(a.image != c.image);
}

TEST_CASE("mask and np_region are disjoint for 100 seeds") {
  SceneConfig cfg;
  for (int s = 0; s < 100; ++s) {
    cfg.seed = std::uint64_t(s);
    const Scene scene = generate_scene(cfg);
    for (std::size_t i = 0; i < scene.mask.px.size(); ++i)
      REQUIRE((scene.mask.px[i] && scene.np_region.px[i]) == false);
    CHECK(is_binary_mask(scene.mask));
    CHECK(is_binary_mask(scene.np_region));
  }
}

TEST_CASE("vessel fraction stays within the calibrated band over 100 seeds") {
  SceneConfig cfg;
  for (int s = 0; s < 100; ++s) {
    cfg.seed = std::uint64_t(s);
    const double f = vessel_fraction(generate_scene(cfg).mask);
    INFO("seed ", s, " fraction ", f);
    CHECK(f >= 0.05);
    CHECK(f <= 0.35);
  }
}

TEST_CASE("rayleigh multiplier has unit mean") {
  std::mt19937_64 rng(4);
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += rayleigh_unit_mean(rng);
  CHECK(sum / n == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("speckle_stress: zero gain is the identity") {
  SceneConfig cfg;
  cfg.speckle_gain = 0.0;
  cfg.speckle_gain_np = 0.0;
  std::mt19937_64 rng(1);
  Image8 img(32, 32, 77);
  CHECK(speckle_stress(img, Image8(32, 32, 0), cfg, rng) == img);
}

TEST_CASE("speckle_stress approximately preserves the mean") {
  SceneConfig cfg;
  std::mt19937_64 rng(11);
  const Image8 clean(256, 256, 128);
  const Image8 noisy = speckle_stress(clean, Image8(256, 256, 0), cfg, rng);
  double mean = 0;
  for (auto p : noisy.px) mean += p;
  mean /= double(noisy.px.size());
  CHECK(std::abs(mean - 128.0) / 128.0 < 0.05);
}

TEST_CASE("speckle variance is strictly higher inside np regions") {
  // vessel-free constant background isolates the gain difference
  SceneConfig cfg;
  const Index n = 64;
  Image8 clean(n, n, std::uint8_t(cfg.background_level));
  Image8 np(n, n, 0);
  for (Index y = 0; y < n; ++y)
    for (Index x = 0; x < n / 2; ++x) np.at(y, x) = 255;  // left half np
  for (int s = 0; s < 50; ++s) {
    std::mt19937_64 rng(std::uint64_t(1000 + s));
    const Image8 noisy = speckle_stress(clean, np, cfg, rng);
    double s_in = 0, s2_in = 0, s_out = 0, s2_out = 0;
    double n_in = 0, n_out = 0;
    for (Index i = 0; i < n * n; ++i) {
      const double d = double(noisy.px[std::size_t(i)]) -
                       double(clean.px[std::size_t(i)]);
      if (np.px[std::size_t(i)]) {
        s_in += d;
        s2_in += d * d;
        n_in += 1;
      } else {
        s_out += d;
        s2_out += d * d;
        n_out += 1;
      }
    }
    const double var_in = s2_in / n_in - (s_in / n_in) * (s_in / n_in);
    const double var_out = s2_out / n_out - (s_out / n_out) * (s_out / n_out);
    INFO("seed ", 1000 + s, ": var inside ", var_in, " outside ", var_out);
    CHECK(var_in > var_out);
  }
}

TEST_CASE("infeasible configs are rejected") {
  SceneConfig cfg;
  cfg.np_radius_frac_max = 0.6;  // radius would exceed half the image
  CHECK_THROWS_AS(generate_scene(cfg), contract_error);
  SceneConfig bad;
  bad.width_min = 0.0;
  CHECK_THROWS_AS(generate_scene(bad), contract_error);
  SceneConfig rev;
  rev.width_start_min = 4.0;
  rev.width_start_max = 2.0;
  CHECK_THROWS_AS(generate_scene(rev), contract_error);
}

TEST_CASE("generate_dataset writes the contracted layout and split") {
  const fs::path dir = fresh_dir("svs_dataset_test");
  SceneConfig cfg;
  cfg.seed = 7;
  const fs::path manifest_path = generate_dataset(cfg, 10, dir);
  CHECK(manifest_path == dir / "manifest.json");

  const DatasetManifest m = read_manifest(dir);
  CHECK(m.size == 64);
  CHECK(m.seed == 7);
  CHECK(m.train.size() == 5);
  CHECK(m.test.size() == 5);
  // disjoint and exhaustive over 0..9
  std::vector<bool> seen(10, false);
  for (int id : m.train) seen[std::size_t(id)] = true;
  for (int id : m.test) {
    CHECK(!seen[std::size_t(id)]);
    seen[std::size_t(id)] = true;
  }
  for (bool b : seen) CHECK(b);

  for (int id : {0, 9}) {
    const Scene s = load_sample(dir, id);
    CHECK(s.image.h == 64);
    CHECK(is_binary_mask(s.mask));
  }
}

TEST_CASE("regenerating a dataset reproduces byte-identical files") {
  const fs::path d1 = fresh_dir("svs_dataset_rep1");
  const fs::path d2 = fresh_dir("svs_dataset_rep2");
  SceneConfig cfg;
  cfg.seed = 21;
  generate_dataset(cfg, 6, d1);
  generate_dataset(cfg, 6, d2);
  for (const char* sub : {"images", "masks", "regions"})
    for (int i = 0; i < 6; ++i)
      CHECK(slurp(d1 / sub / sample_filename(i)) ==
            slurp(d2 / sub / sample_filename(i)));
  CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));
}

TEST_CASE("dataset rejects too-small counts and bad destinations") {
  SceneConfig cfg;
  CHECK_THROWS_AS(generate_dataset(cfg, 1, fresh_dir("svs_dataset_one")),
                  contract_error);
  CHECK_THROWS_AS(generate_dataset(cfg, 4, "/proc/nope/dataset"), io_error);
}

TEST_CASE("png round trip is exact") {
  std::mt19937 rng(31);
  Image8 img(33, 47);
  for (auto& p : img.px) p = std::uint8_t(rng() % 256);
  const fs::path dir = fresh_dir("svs_png_test");
  write_png(dir / "a.png", img);
  CHECK(read_png(dir / "a.png") == img);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), io_error);
}

TEST_CASE("quantize_u8 rounds half up and clamps") {
  CHECK(quantize_u8(0.49) == 0);
  CHECK(quantize_u8(0.5) == 1);
  CHECK(quantize_u8(127.5) == 128);
  CHECK(quantize_u8(254.4) == 254);
  CHECK(quantize_u8(254.5) == 255);
  CHECK(quantize_u8(300.0) == 255);
  CHECK(quantize_u8(-3.0) == 0);
  CHECK(quantize_u8(255.0 * (1.0 - 1e-9)) == 255);
}

TEST_CASE("scenes look like the intended phenomenon") {
  // vessels bright over background; np interior darker than vessel cores
  SceneConfig cfg;
  cfg.seed = 3;
  const Scene s = generate_scene(cfg);
  double vessel_mean = 0, bg_mean = 0, nv = 0, nb = 0;
  for (Index i = 0; i < 64 * 64; ++i) {
    if (s.mask.px[std::size_t(i)]) {
      vessel_mean += s.image.px[std::size_t(i)];
      nv += 1;
    } else if (!s.np_region.px[std::size_t(i)]) {
      bg_mean += s.image.px[std::size_t(i)];
      nb += 1;
    }
  }
  REQUIRE(nv > 0);
  REQUIRE(nb > 0);
  CHECK(vessel_mean / nv > bg_mean / nb + 20.0);
}
