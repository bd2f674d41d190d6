#include "cohnet/dataset.hpp"

#include <set>

#include "cohnet/fileutil.hpp"
#include "cohnet/random.hpp"
#include "cohnet/raster_io.hpp"

namespace cohnet {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ScalarRaster mask_raster(const Mask& m) {
  return ScalarRaster(m.cast<float>());
}

ordered_json budget_json(const DecorrelationBudget& b) {
  return {{"gamma_snr", b.gamma_snr},   {"gamma_rg", b.gamma_rg},
          {"gamma_quant", b.gamma_quant}, {"gamma_temp", b.gamma_temp},
          {"gamma_sensor", b.gamma_sensor}};
}

DecorrelationBudget budget_from(const nlohmann::json& j) {
  DecorrelationBudget b;
  b.gamma_snr = j.at("gamma_snr").get<double>();
  b.gamma_rg = j.at("gamma_rg").get<double>();
  b.gamma_quant = j.at("gamma_quant").get<double>();
  b.gamma_temp = j.at("gamma_temp").get<double>();
  b.gamma_sensor = j.at("gamma_sensor").get<double>();
  return b;
}

}  // namespace

ProcessedScene process_scene(const SimConfig& sim, const DatasetOptions& options) {
  ProcessedScene p;
  p.scene = make_scene(sim);
  const SlcPair pair = simulate_slc_pair(p.scene, derive_seed(sim.seed, 101));
  p.coherence = magnitude(estimate_coherence(pair, options.window));
  p.volcorr = volume_decorrelation(p.coherence, sim.budget);
  p.reference = make_reference_heights(p.scene, options.reference_noise, derive_seed(sim.seed, 102));
  p.mask = p.reference.valid();
  return p;
}

std::uint64_t scene_seed(std::uint64_t master, int region, int split, int index) {
  const std::uint64_t stream = (std::uint64_t(region) << 40) | (std::uint64_t(split) << 32) |
                               static_cast<std::uint32_t>(index);
  return derive_seed(master, stream);
}

ordered_json build_dataset(const std::vector<RegionSpec>& regions, const DatasetOptions& options,
                           const fs::path& out_dir) {
  require(!regions.empty(), "dataset needs at least one region");
  std::set<std::string> names;
  for (const auto& r : regions)
    if (!names.insert(r.name).second)
      fail(ErrorKind::InvalidArgument, "duplicate region name '" + r.name + "'");

  ordered_json manifest = {{"format", "cohnet-manifest-1"},
                           {"master_seed", options.master_seed},
                           {"window", options.window},
                           {"patch_size", options.patch_size},
                           {"stride", options.stride},
                           {"reference_noise", options.reference_noise},
                           {"regions", ordered_json::object()}};
  std::set<std::uint64_t> seeds;

  for (std::size_t ri = 0; ri < regions.size(); ++ri) {
    const RegionSpec& region = regions[ri];
    ordered_json rj = {{"budget", budget_json(region.sim.budget)},
                       {"mean_height", region.sim.mean_height},
                       {"train", ordered_json::array()},
                       {"test", ordered_json::array()},
                       {"train_scenes", ordered_json::array()},
                       {"test_scenes", ordered_json::array()}};
    for (int split = 0; split < 2; ++split) {
      const std::string split_name = split == 0 ? "train" : "test";
      const int count = split == 0 ? region.n_train : region.n_test;
      for (int k = 0; k < count; ++k) {
        SimConfig sim = region.sim;
        sim.seed = scene_seed(options.master_seed, static_cast<int>(ri), split, k);
        if (!seeds.insert(sim.seed).second)
          fail(ErrorKind::InvalidArgument, "scene seed collision");
        const ProcessedScene ps = process_scene(sim, options);

        const fs::path rel = fs::path(region.name) / split_name / ("scene_" + std::to_string(k));
        const fs::path dir = out_dir / rel;
        const ScalarRaster mask = mask_raster(ps.mask);
        write_raster(ps.coherence, dir / "coherence.chr");
        write_raster(ps.scene.kz_map, dir / "kz.chr");
        write_raster(ps.reference, dir / "reference.chr");
        write_raster(mask, dir / "mask.chr");
        write_raster(ps.volcorr, dir / "volcorr.chr");
        write_raster(ps.scene.height_map, dir / "truth.chr");

        const PatchGrid grid =
            make_patch_grid(sim.width, sim.height, options.patch_size, options.stride);
        auto& patch_list = rj[split_name];
        const std::size_t first = patch_list.size();
        for (std::size_t pi = 0; pi < grid.origins.size(); ++pi) {
          const auto o = grid.origins[pi];
          const std::string stem = "p" + std::to_string(pi) + "_";
          const fs::path pdir = rel / "patches";
          write_raster(crop(ps.coherence, o, grid.patch_size), out_dir / pdir / (stem + "coherence.chr"));
          write_raster(crop(ps.scene.kz_map, o, grid.patch_size), out_dir / pdir / (stem + "kz.chr"));
          write_raster(crop(ps.reference, o, grid.patch_size), out_dir / pdir / (stem + "reference.chr"));
          write_raster(crop(mask, o, grid.patch_size), out_dir / pdir / (stem + "mask.chr"));
          patch_list.push_back({{"coherence", (pdir / (stem + "coherence.chr")).generic_string()},
                                {"kz", (pdir / (stem + "kz.chr")).generic_string()},
                                {"reference", (pdir / (stem + "reference.chr")).generic_string()},
                                {"mask", (pdir / (stem + "mask.chr")).generic_string()},
                                {"seed", sim.seed},
                                {"scene", k},
                                {"origin", {o.row, o.col}}});
        }
        rj[split_name + "_scenes"].push_back(
            {{"seed", sim.seed},
             {"width", sim.width},
             {"height", sim.height},
             {"kz", ps.scene.kz},
             {"coherence", (rel / "coherence.chr").generic_string()},
             {"kz_map", (rel / "kz.chr").generic_string()},
             {"reference", (rel / "reference.chr").generic_string()},
             {"mask", (rel / "mask.chr").generic_string()},
             {"volcorr", (rel / "volcorr.chr").generic_string()},
             {"truth", (rel / "truth.chr").generic_string()},
             {"first_patch", first},
             {"patch_count", grid.origins.size()}});
      }
    }
    manifest["regions"][region.name] = std::move(rj);
  }
  write_text_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

const RegionData& Manifest::region(const std::string& name) const {
  for (const auto& r : regions)
    if (r.name == name) return r;
  fail(ErrorKind::InvalidArgument, "manifest has no region '" + name + "'");
}

Manifest load_manifest(const fs::path& manifest_path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, "manifest parse error: " + std::string(e.what()));
  }
  Manifest m;
  m.root = manifest_path.parent_path();
  try {
    m.patch_size = j.at("patch_size").get<int>();
    m.stride = j.at("stride").get<int>();
    m.window = j.at("window").get<int>();
    for (const auto& [name, rj] : j.at("regions").items()) {
      RegionData r;
      r.name = name;
      r.budget = budget_from(rj.at("budget"));
      for (const char* split : {"train", "test"}) {
        auto& patches = std::string(split) == "train" ? r.train : r.test;
        for (const auto& pj : rj.at(split)) {
          PatchRecord p;
          p.coherence = pj.at("coherence").get<std::string>();
          p.kz = pj.at("kz").get<std::string>();
          p.reference = pj.at("reference").get<std::string>();
          p.mask = pj.at("mask").get<std::string>();
          p.seed = pj.at("seed").get<std::uint64_t>();
          p.scene = pj.at("scene").get<int>();
          p.origin = {pj.at("origin")[0].get<int>(), pj.at("origin")[1].get<int>()};
          patches.push_back(std::move(p));
        }
        auto& scenes = std::string(split) == "train" ? r.train_scenes : r.test_scenes;
        for (const auto& sj : rj.at(std::string(split) + "_scenes")) {
          SceneRecord s;
          s.coherence = sj.at("coherence").get<std::string>();
          s.kz = sj.at("kz_map").get<std::string>();
          s.reference = sj.at("reference").get<std::string>();
          s.mask = sj.at("mask").get<std::string>();
          s.volcorr = sj.at("volcorr").get<std::string>();
          s.truth = sj.at("truth").get<std::string>();
          s.seed = sj.at("seed").get<std::uint64_t>();
          s.width = sj.at("width").get<int>();
          s.height = sj.at("height").get<int>();
          s.kz_value = sj.at("kz").get<double>();
          s.first_patch = sj.at("first_patch").get<std::size_t>();
          s.patch_count = sj.at("patch_count").get<std::size_t>();
          scenes.push_back(std::move(s));
        }
      }
      m.regions.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, "malformed manifest: " + std::string(e.what()));
  }
  return m;
}

PatchSample load_patch(const Manifest& m, const PatchRecord& rec) {
  PatchSample s;
  s.coherence = read_scalar_raster(m.root / rec.coherence);
  s.kz = read_scalar_raster(m.root / rec.kz);
  s.reference = read_scalar_raster(m.root / rec.reference);
  const ScalarRaster mask = read_scalar_raster(m.root / rec.mask);
  s.mask = s.reference.valid() && mask.valid() && (mask.values() > 0.5f);
  return s;
}

SceneSample load_scene(const Manifest& m, const SceneRecord& rec) {
  SceneSample s;
  s.coherence = read_scalar_raster(m.root / rec.coherence);
  s.kz = read_scalar_raster(m.root / rec.kz);
  s.reference = read_scalar_raster(m.root / rec.reference);
  s.volcorr = read_scalar_raster(m.root / rec.volcorr);
  s.truth = read_scalar_raster(m.root / rec.truth);
  const ScalarRaster mask = read_scalar_raster(m.root / rec.mask);
  s.mask = s.reference.valid() && mask.valid() && (mask.values() > 0.5f);
  s.grid = make_patch_grid(rec.width, rec.height, m.patch_size, m.stride);
  return s;
}

}  // namespace cohnet
