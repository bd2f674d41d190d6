#include "cohnet/experiments.hpp"

#include <cmath>

#include "cohnet/nn/weights.hpp"
#include "cohnet/random.hpp"

namespace cohnet {

namespace fs = std::filesystem;

Surrogate train_grid_surrogate(const NsmGridConfig& cfg, std::uint64_t seed, const fs::path& path,
                               NsmTrainReport* report) {
  Surrogate s = make_surrogate();
  const NsmDataset data = build_nsm_dataset(cfg.kz_values, cfg.grid_n);
  NsmTrainReport r = train_nsm(s, data, cfg.hyper, seed);
  save_surrogate(s, path);
  if (report) *report = std::move(r);
  return s;
}

double surrogate_region_rmse(const Surrogate& nsm, const Manifest& m, const std::string& region,
                             SceneInput input, bool test_split) {
  const auto& r = m.region(region);
  double se = 0.0;
  std::int64_t n = 0;
  for (const auto& rec : test_split ? r.test_scenes : r.train_scenes) {
    const SceneSample sc = load_scene(m, rec);
    const ScalarRaster h =
        nsm_predict(nsm, input == SceneInput::Coherence ? sc.coherence : sc.volcorr, sc.kz);
    const Mask joint = joint_mask(h, sc.reference, &sc.mask);
    const auto d = h.values().cast<double>() - sc.reference.values().cast<double>();
    se += joint.select(d.square(), 0.0).sum();
    n += joint.count();
  }
  if (n == 0) fail(ErrorKind::NoValidPixels, "region " + region + " has no valid reference pixels");
  return std::sqrt(se / static_cast<double>(n));
}

nlohmann::ordered_json OrderingReport::to_json() const {
  nlohmann::ordered_json j;
  j["rmse_raw"] = rmse_raw;
  j["rmse_volcorr"] = rmse_volcorr;
  j["rmse_optimized"] = rmse_optimized;
  if (rmse_direct) j["rmse_direct"] = *rmse_direct;
  j["nsm_heldout_rmse"] = nsm_heldout_rmse;
  j["first_epoch_loss"] = first_loss;
  j["last_epoch_loss"] = last_loss;
  j["nsm_checksum_before"] = nsm_checksum_before;
  j["nsm_checksum_after"] = nsm_checksum_after;
  j["ordering_holds"] = rmse_raw > rmse_volcorr && rmse_volcorr > rmse_optimized;
  return j;
}

OrderingReport run_ordering(const OrderingOptions& opt, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  DatasetOptions data = opt.data;
  data.master_seed = opt.seed;
  build_dataset({RegionSpec{"default", opt.sim, opt.n_train, opt.n_test}}, data, out_dir / "data");
  const Manifest m = load_manifest(out_dir / "data" / "manifest.json");

  OrderingReport rep;
  NsmTrainReport nsm_report;
  const fs::path nsm_path = out_dir / "nsm.cwt";
  const Surrogate nsm = train_grid_surrogate(opt.nsm, derive_seed(opt.seed, 11), nsm_path, &nsm_report);
  rep.nsm_heldout_rmse = nsm_report.heldout_rmse;
  rep.nsm_checksum_before = nn::file_checksum(nsm_path);

  const auto train = load_patches(m, {"default"});
  CohnetPipeline cohnet = make_cohnet(nsm, opt.net, derive_seed(opt.seed, 12));
  const TrainLog log = train_pipeline(cohnet, train, opt.hyper, derive_seed(opt.seed, 13));
  write_text_atomic(out_dir / "cohnet_log.csv", log.to_csv());
  save_model(cohnet, out_dir / "cohnet.cwt");
  save_surrogate(cohnet.nsm, nsm_path);
  rep.nsm_checksum_after = nn::file_checksum(nsm_path);
  rep.first_loss = log.epochs.front().train_loss;
  rep.last_loss = log.epochs.back().train_loss;

  rep.rmse_raw = surrogate_region_rmse(nsm, m, "default", SceneInput::Coherence);
  rep.rmse_volcorr = surrogate_region_rmse(nsm, m, "default", SceneInput::Volcorr);
  rep.rmse_optimized = region_rmse(cohnet, m, "default");

  if (opt.with_direct) {
    CohnetPipeline direct = make_direct(opt.net, nsm.h_max, derive_seed(opt.seed, 14));
    const TrainLog dlog = train_pipeline(direct, train, opt.hyper, derive_seed(opt.seed, 15));
    write_text_atomic(out_dir / "direct_log.csv", dlog.to_csv());
    save_model(direct, out_dir / "direct.cwt");
    rep.rmse_direct = region_rmse(direct, m, "default");
  }
  write_text_atomic(out_dir / "report.json", rep.to_json().dump(2) + "\n");
  return rep;
}

std::vector<RegionSpec> benchmark_regions(int size, int n_train, int n_test) {
  struct Row {
    const char* name;
    double mean, snr, kz_min, kz_max;
  };
  const Row rows[] = {
      {"north", 32.7, 0.90, 0.06, 0.08},
      {"coast", 30.5, 0.70, 0.08, 0.10},
      {"hills", 31.1, 0.80, 0.10, 0.12},
      {"east", 37.8, 0.95, 0.07, 0.09},
  };
  std::vector<RegionSpec> out;
  for (const auto& r : rows) {
    RegionSpec spec;
    spec.name = r.name;
    spec.sim.width = size;
    spec.sim.height = size;
    spec.sim.mean_height = r.mean;
    spec.sim.kz_min = r.kz_min;
    spec.sim.kz_max = r.kz_max;
    spec.sim.budget.gamma_snr = r.snr;
    spec.n_train = n_train;
    spec.n_test = n_test;
    out.push_back(spec);
  }
  return out;
}

CrossRegionReport run_cross_region(const CrossRegionOptions& opt, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  DatasetOptions data = opt.data;
  data.master_seed = opt.seed;
  build_dataset(opt.regions, data, out_dir / "data");
  const Manifest m = load_manifest(out_dir / "data" / "manifest.json");
  const Surrogate nsm = train_grid_surrogate(opt.nsm, derive_seed(opt.seed, 11), out_dir / "nsm.cwt");

  std::vector<std::string> names;
  for (const auto& r : opt.regions) names.push_back(r.name);
  std::vector<std::vector<std::string>> train_sets;
  for (const auto& n : names) train_sets.push_back({n});
  train_sets.push_back(names);

  std::vector<CohnetPipeline> models;
  std::vector<std::pair<std::string, const CohnetPipeline*>> rows;
  models.reserve(train_sets.size());
  for (std::size_t i = 0; i < train_sets.size(); ++i) {
    const std::string label = i < names.size() ? names[i] : "pooled";
    CohnetPipeline p = make_cohnet(nsm, opt.net, derive_seed(opt.seed, 200 + i));
    const TrainLog log =
        train_pipeline(p, load_patches(m, train_sets[i]), opt.hyper, derive_seed(opt.seed, 300 + i));
    write_text_atomic(out_dir / (label + "_log.csv"), log.to_csv());
    save_model(p, out_dir / (label + ".cwt"));
    models.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < models.size(); ++i)
    rows.emplace_back(i < names.size() ? names[i] : "pooled", &models[i]);

  CrossRegionReport rep;
  rep.matrix = cross_region_matrix(rows, m, names);
  for (std::size_t i = 0; i < names.size(); ++i) {
    rep.self_train_rmse.push_back(region_rmse(models[i], m, names[i], false));
    rep.self_test_rmse.push_back(rep.matrix.values[i][i]);
  }
  write_text_atomic(out_dir / "matrix.csv", rep.matrix.to_csv());
  return rep;
}

}  // namespace cohnet
