#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohnet/patches.hpp"
#include "cohnet/simulator.hpp"

namespace cohnet {

struct RegionSpec {
  std::string name;
  SimConfig sim;  // seed is replaced per scene
  int n_train = 1;
  int n_test = 1;
};

struct DatasetOptions {
  std::uint64_t master_seed = 7;
  int window = 7;
  int patch_size = 64;
  int stride = 32;
  double reference_noise = 1.0;  // m
};

/// Everything derived from one simulated scene.
struct ProcessedScene {
  SyntheticScene scene;
  ScalarRaster coherence;  // |gamma| from the boxcar estimator
  ScalarRaster volcorr;  // volume decorrelation after budget compensation
  ScalarRaster reference;  // noisy truth, invalid off-forest
  Mask mask;  // pixels carrying a reference height
};

ProcessedScene process_scene(const SimConfig& sim, const DatasetOptions& options);

/// Seed of scene `index` in (region, split); split 0 = train, 1 = test.
std::uint64_t scene_seed(std::uint64_t master, int region, int split, int index);

/// Simulates, patches and writes every region; returns the manifest, which
/// is also written to out_dir/manifest.json. Rasters use the CHR1 format.
nlohmann::ordered_json build_dataset(const std::vector<RegionSpec>& regions,
                                     const DatasetOptions& options,
                                     const std::filesystem::path& out_dir);

// ---- reading a manifest back ----

struct PatchRecord {
  std::filesystem::path coherence, kz, reference, mask;
  std::uint64_t seed = 0;
  int scene = 0;
  PatchOrigin origin;
};

struct SceneRecord {
  std::filesystem::path coherence, kz, reference, mask, volcorr, truth;
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  double kz_value = 0.0;
  std::size_t first_patch = 0;
  std::size_t patch_count = 0;
};

struct RegionData {
  std::string name;
  DecorrelationBudget budget;
  std::vector<PatchRecord> train, test;
  std::vector<SceneRecord> train_scenes, test_scenes;
};

struct Manifest {
  std::filesystem::path root;
  int patch_size = 64;
  int stride = 32;
  int window = 7;
  std::vector<RegionData> regions;

  const RegionData& region(const std::string& name) const;
};

Manifest load_manifest(const std::filesystem::path& manifest_path);

struct PatchSample {
  ScalarRaster coherence;
  ScalarRaster kz;
  ScalarRaster reference;
  Mask mask;
};

PatchSample load_patch(const Manifest& m, const PatchRecord& rec);

struct SceneSample {
  ScalarRaster coherence, kz, reference, volcorr, truth;
  Mask mask;
  PatchGrid grid;
};

SceneSample load_scene(const Manifest& m, const SceneRecord& rec);

}  // namespace cohnet
