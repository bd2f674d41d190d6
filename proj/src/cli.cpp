#include "cohnet/cli.hpp"

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "cohnet/config.hpp"
#include "cohnet/experiments.hpp"
#include "cohnet/export.hpp"
#include "cohnet/nn/weights.hpp"
#include "cohnet/raster_io.hpp"
#include "cohnet/random.hpp"

namespace cohnet {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 7;
  std::string config;
  std::string out = ".";
  bool quiet = false;
};

std::string text(const KeyValueConfig& c, const std::string& key, const std::string& fallback) {
  return c.get(key, fallback);
}

SimConfig sim_from(const KeyValueConfig& c) {
  SimConfig s;
  s.width = c.get("width", s.width);
  s.height = c.get("height", s.height);
  s.mean_height = c.get("mean_height", s.mean_height);
  s.height_spread = c.get("height_spread", s.height_spread);
  s.h_max = c.get("h_max", s.h_max);
  s.correlation_length = c.get("correlation_length", s.correlation_length);
  s.forest_fraction = c.get("forest_fraction", s.forest_fraction);
  s.kz_min = c.get("kz_min", s.kz_min);
  s.kz_max = c.get("kz_max", s.kz_max);
  s.budget.gamma_snr = c.get("gamma_snr", s.budget.gamma_snr);
  s.budget.gamma_rg = c.get("gamma_rg", s.budget.gamma_rg);
  s.budget.gamma_quant = c.get("gamma_quant", s.budget.gamma_quant);
  s.budget.gamma_temp = c.get("gamma_temp", s.budget.gamma_temp);
  s.budget.gamma_sensor = c.get("gamma_sensor", s.budget.gamma_sensor);
  s.sigma = c.get("sigma", s.sigma);
  s.mu = c.get("mu", s.mu);
  return s;
}

DatasetOptions data_from(const KeyValueConfig& c, std::uint64_t seed) {
  DatasetOptions d;
  d.master_seed = seed;
  d.window = c.get("window", d.window);
  d.patch_size = c.get("patch_size", d.patch_size);
  d.stride = c.get("stride", d.stride);
  d.reference_noise = c.get("reference_noise", d.reference_noise);
  return d;
}

DecorrelationBudget budget_from(const KeyValueConfig& c) {
  DecorrelationBudget b = SimConfig{}.budget;
  b.gamma_snr = c.get("gamma_snr", b.gamma_snr);
  b.gamma_rg = c.get("gamma_rg", b.gamma_rg);
  b.gamma_quant = c.get("gamma_quant", b.gamma_quant);
  b.gamma_temp = c.get("gamma_temp", b.gamma_temp);
  b.gamma_sensor = c.get("gamma_sensor", b.gamma_sensor);
  b.validate();
  return b;
}

TrainHyper hyper_from(const KeyValueConfig& c) {
  TrainHyper h;
  h.epochs = c.get("epochs", h.epochs);
  h.batch_size = c.get("batch_size", h.batch_size);
  h.adam.lr_start = c.get("lr_start", h.adam.lr_start);
  h.adam.lr_end = c.get("lr_end", h.adam.lr_end);
  const std::string loss = text(c, "loss", "rmse");
  if (loss == "rmse") h.loss = LossKind::BatchRmse;
  else if (loss == "sum_root") h.loss = LossKind::SumRootLiteral;
  else throw UsageError("loss must be rmse or sum_root");
  return h;
}

FirstNetConfig net_from(const KeyValueConfig& c) {
  FirstNetConfig n;
  n.base_ch = c.get("base_channels", n.base_ch);
  n.depth = c.get("depth", n.depth);
  n.kz_input = c.get("kz_input", n.kz_input);
  return n;
}

NsmGridConfig nsm_grid_from(const KeyValueConfig& c) {
  NsmGridConfig g;
  g.kz_values = c.get_list("nsm_kz", g.kz_values);
  g.grid_n = c.get("nsm_grid_n", g.grid_n);
  g.hyper.epochs = c.get("nsm_epochs", g.hyper.epochs);
  g.hyper.adam.lr_start = c.get("nsm_lr_start", g.hyper.adam.lr_start);
  g.hyper.batch_size = c.get("nsm_batch_size", g.hyper.batch_size);
  return g;
}

void reject_unused(const KeyValueConfig& c) {
  const auto unused = c.unused_keys();
  if (unused.empty()) return;
  std::string msg = "unknown config keys:";
  for (const auto& k : unused) msg += " " + k;
  throw UsageError(msg);
}

EpochCallback progress(bool quiet, const std::string& tag) {
  if (quiet) return {};
  return [tag](const EpochRecord& e) {
    std::fprintf(stderr, "[%s] epoch %d loss %.4f lr %.2e\n", tag.c_str(), e.epoch, e.train_loss, e.lr);
  };
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

/// Stacks same-width rasters vertically so metrics pool over scenes.
ScalarRaster stack(const std::vector<ScalarRaster>& parts) {
  int rows = 0;
  for (const auto& p : parts) {
    if (p.width() != parts.front().width()) fail(ErrorKind::ShapeMismatch, "scene widths differ");
    rows += p.height();
  }
  Grid<float> v(rows, parts.front().width());
  Mask m(rows, parts.front().width());
  int r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.height()) = p.values();
    m.middleRows(r, p.height()) = p.valid();
    r += p.height();
  }
  return ScalarRaster(std::move(v), std::move(m));
}

const char* kSimKeys =
    "simulate keys: width height mean_height height_spread h_max correlation_length "
    "forest_fraction kz_min kz_max gamma_snr gamma_rg gamma_quant gamma_temp gamma_sensor sigma mu "
    "n_train n_test window patch_size stride reference_noise benchmark(bool) region";
const char* kTrainKeys =
    "training keys: epochs batch_size lr_start lr_end loss(rmse|sum_root) base_channels depth "
    "kz_input; surrogate keys: nsm_kz nsm_grid_n nsm_epochs nsm_lr_start nsm_batch_size";

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Forest height from InSAR coherence with a physics-constrained network", "cohnet"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--config", g.config, "key=value config file");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
  app.footer(std::string(kSimKeys) + "\n" + kTrainKeys);

  std::function<void()> action;
  KeyValueConfig cfg;
  auto out = [&] { return fs::path(g.out); };

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate scenes, patches and a manifest");
  bool scene_only = false;
  sim->add_flag("--scene-only", scene_only, "Write one SLC pair with kz and truth instead");
  sim->callback([&] {
    action = [&] {
      fs::create_directories(out());
      if (scene_only) {
        SimConfig s = sim_from(cfg);
        s.seed = g.seed;
        reject_unused(cfg);
        const SyntheticScene scene = make_scene(s);
        const SlcPair pair = simulate_slc_pair(scene, derive_seed(g.seed, 101));
        write_raster(pair.s1, out() / "s1.chr");
        write_raster(pair.s2, out() / "s2.chr");
        write_raster(scene.kz_map, out() / "kz.chr");
        write_raster(scene.height_map, out() / "truth.chr");
        return;
      }
      std::vector<RegionSpec> regions;
      const int n_train = cfg.get("n_train", 1), n_test = cfg.get("n_test", 1);
      if (cfg.get("benchmark", false)) {
        regions = benchmark_regions(cfg.get("width", 128), n_train, n_test);
      } else {
        regions.push_back({text(cfg, "region", "default"), sim_from(cfg), n_train, n_test});
      }
      const DatasetOptions d = data_from(cfg, g.seed);
      reject_unused(cfg);
      build_dataset(regions, d, out());
    };
  });

  // coherence
  auto* coh = app.add_subcommand("coherence", "Estimate complex coherence from an SLC pair");
  std::string s1_path, s2_path;
  int window = 7;
  coh->add_option("--s1", s1_path, "Primary SLC (CHR1 complex)")->required();
  coh->add_option("--s2", s2_path, "Secondary SLC (CHR1 complex)")->required();
  coh->add_option("--window", window, "Odd boxcar window")->capture_default_str();
  coh->callback([&] {
    action = [&] {
      reject_unused(cfg);
      const SlcPair pair{read_complex_raster(s1_path), read_complex_raster(s2_path)};
      fs::create_directories(out());
      write_raster(estimate_coherence(pair, window), out() / "coherence.chr");
    };
  });

  // volcorr
  auto* vol = app.add_subcommand("volcorr", "Compensate the decorrelation budget");
  std::string gamma_path;
  vol->add_option("--gamma", gamma_path, "Coherence raster (complex or magnitude)")->required();
  vol->callback([&] {
    action = [&] {
      const DecorrelationBudget b = budget_from(cfg);
      reject_unused(cfg);
      const AnyRaster in = read_raster(gamma_path);
      const ScalarRaster v = std::visit([&](const auto& r) { return volume_decorrelation(r, b); }, in);
      fs::create_directories(out());
      write_raster(v, out() / "volcorr.chr");
    };
  });

  // invert
  auto* inv = app.add_subcommand("invert", "Physical height inversion");
  std::string kz_path, mode = "sinc";
  double tol = 1e-3;
  inv->add_option("--gamma", gamma_path, "Volume decorrelation raster")->required();
  inv->add_option("--kz", kz_path, "Vertical wavenumber raster")->required();
  inv->add_option("--mode", mode, "sinc or lut")->check(CLI::IsMember({"sinc", "lut"}))->capture_default_str();
  inv->add_option("--tol", tol, "Bisection tolerance in metres")->capture_default_str();
  inv->callback([&] {
    action = [&] {
      LutGrids grids;
      const double step = cfg.get("lut_hv_step", 0.25);
      const double top = cfg.get("lut_hv_max", 80.0);
      for (double h = 0.0; h <= top + 1e-9; h += step) grids.hv_grid.push_back(h);
      grids.sigma_grid = cfg.get_list("lut_sigma", {0.0});
      reject_unused(cfg);
      const ScalarRaster gamma = read_scalar_raster(gamma_path);
      const ScalarRaster kz = read_scalar_raster(kz_path);
      const ScalarRaster h = mode == "sinc" ? invert_raster(gamma, kz, InversionMode::Sinc, tol)
                                            : invert_raster(gamma, kz, InversionMode::Lut, tol, &grids);
      fs::create_directories(out());
      write_raster(h, out() / "heights.chr");
    };
  });

  // train-surrogate
  auto* tsur = app.add_subcommand("train-surrogate", "Train the neural surrogate");
  std::string manifest_path, regions_arg;
  tsur->add_option("--manifest", manifest_path, "Train on scene pixels instead of the analytic grid");
  tsur->add_option("--regions", regions_arg, "Comma-separated regions (scene mode)");
  tsur->callback([&] {
    action = [&] {
      NsmGridConfig gc = nsm_grid_from(cfg);
      const auto max_samples = static_cast<std::size_t>(cfg.get("nsm_max_samples", 20000));
      reject_unused(cfg);
      fs::create_directories(out());
      Surrogate s = make_surrogate();
      NsmTrainReport rep;
      if (manifest_path.empty()) {
        rep = train_nsm(s, build_nsm_dataset(gc.kz_values, gc.grid_n), gc.hyper, derive_seed(g.seed, 11));
      } else {
        const Manifest m = load_manifest(manifest_path);
        std::vector<std::string> names;
        if (regions_arg.empty()) {
          for (const auto& r : m.regions) names.push_back(r.name);
        } else {
          names = KeyValueConfig::parse("r=" + regions_arg).get_strings("r", {});
        }
        rep = train_nsm(s, build_nsm_dataset_from_scenes(m, names, max_samples, g.seed), gc.hyper,
                        derive_seed(g.seed, 11));
      }
      save_surrogate(s, out() / "nsm.cwt");
      write_json(out() / "nsm_report.json",
                 ordered_json{{"train_rmse", rep.train_rmse}, {"heldout_rmse", rep.heldout_rmse}});
    };
  });

  // train-cohnet / train-direct
  std::string nsm_path;
  auto regions_of = [&](const Manifest& m) {
    if (!regions_arg.empty()) return KeyValueConfig::parse("r=" + regions_arg).get_strings("r", {});
    std::vector<std::string> names;
    for (const auto& r : m.regions) names.push_back(r.name);
    return names;
  };
  auto* tco = app.add_subcommand("train-cohnet", "Train CoHNet through a frozen surrogate");
  tco->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  tco->add_option("--nsm", nsm_path, "Surrogate weights")->required();
  tco->add_option("--regions", regions_arg, "Comma-separated training regions (default all)");
  tco->callback([&] {
    action = [&] {
      const TrainHyper h = hyper_from(cfg);
      const FirstNetConfig n = net_from(cfg);
      reject_unused(cfg);
      const Manifest m = load_manifest(manifest_path);
      const Surrogate nsm = load_surrogate(nsm_path);
      CohnetPipeline p = make_cohnet(nsm, n, derive_seed(g.seed, 12));
      const TrainLog log = train_pipeline(p, load_patches(m, regions_of(m)), h, derive_seed(g.seed, 13),
                                          progress(g.quiet, "cohnet"));
      fs::create_directories(out());
      save_model(p, out() / "cohnet.cwt");
      write_text_atomic(out() / "cohnet_log.csv", log.to_csv());
    };
  });
  auto* tdi = app.add_subcommand("train-direct", "Train the direct coherence-to-height baseline");
  tdi->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  tdi->add_option("--regions", regions_arg, "Comma-separated training regions (default all)");
  tdi->callback([&] {
    action = [&] {
      const TrainHyper h = hyper_from(cfg);
      const FirstNetConfig n = net_from(cfg);
      const double h_max = cfg.get("h_max", kDefaultHeightMax);
      reject_unused(cfg);
      const Manifest m = load_manifest(manifest_path);
      CohnetPipeline p = make_direct(n, h_max, derive_seed(g.seed, 14));
      const TrainLog log = train_pipeline(p, load_patches(m, regions_of(m)), h, derive_seed(g.seed, 15),
                                          progress(g.quiet, "direct"));
      fs::create_directories(out());
      save_model(p, out() / "direct.cwt");
      write_text_atomic(out() / "direct_log.csv", log.to_csv());
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a model on a region's test scenes");
  std::string model_path, region;
  bool on_train = false;
  ev->add_option("--model", model_path, "Model weights")->required();
  ev->add_option("--nsm", nsm_path, "Surrogate weights (CoHNet models)");
  ev->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  ev->add_option("--region", region, "Region name")->required();
  ev->add_flag("--train-split", on_train, "Evaluate on training scenes");
  ev->callback([&] {
    action = [&] {
      reject_unused(cfg);
      const Manifest m = load_manifest(manifest_path);
      std::optional<Surrogate> nsm;
      if (!nsm_path.empty()) nsm = load_surrogate(nsm_path);
      const CohnetPipeline p = load_model(model_path, nsm ? &*nsm : nullptr);
      std::vector<ScalarRaster> pred, ref;
      const auto& r = m.region(region);
      for (const auto& rec : on_train ? r.train_scenes : r.test_scenes) {
        const SceneSample sc = load_scene(m, rec);
        pred.push_back(predict_scene(p, sc).height);
        ref.push_back(with_mask(sc.reference, sc.mask));
      }
      if (pred.empty()) fail(ErrorKind::NoValidPixels, "region has no scenes in that split");
      const MetricReport rep = evaluate(stack(pred), stack(ref));
      fs::create_directories(out());
      nlohmann::json j = rep;
      write_text_atomic(out() / "metrics.json", j.dump(2) + "\n");
      std::cout << j.dump() << "\n";
    };
  });

  // matrix
  auto* mat = app.add_subcommand("matrix", "Cross-region RMSE matrix");
  std::vector<std::string> models;
  mat->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  mat->add_option("--model", models, "name=path, repeatable")->required();
  mat->add_option("--nsm", nsm_path, "Surrogate weights (CoHNet models)");
  mat->add_option("--regions", regions_arg, "Comma-separated test regions (default all)");
  bool fidelity = false;
  mat->add_flag("--surrogates", fidelity, "Models are surrogates; compare with the physical inversion");
  mat->callback([&] {
    action = [&] {
      reject_unused(cfg);
      const Manifest m = load_manifest(manifest_path);
      const auto names = regions_of(m);
      std::vector<std::pair<std::string, fs::path>> entries;
      for (const auto& s : models) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--model expects name=path");
        entries.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      RmseMatrix result;
      if (fidelity) {
        std::vector<Surrogate> nsms;
        for (const auto& e : entries) nsms.push_back(load_surrogate(e.second));
        std::vector<std::pair<std::string, const Surrogate*>> rows;
        for (std::size_t i = 0; i < nsms.size(); ++i) rows.emplace_back(entries[i].first, &nsms[i]);
        std::vector<RegionInputs> inputs;
        for (const auto& n : names) inputs.push_back(region_test_inputs(m, n));
        result = nsm_fidelity_matrix(rows, inputs);
      } else {
        std::optional<Surrogate> nsm;
        if (!nsm_path.empty()) nsm = load_surrogate(nsm_path);
        std::vector<CohnetPipeline> pipes;
        for (const auto& e : entries) pipes.push_back(load_model(e.second, nsm ? &*nsm : nullptr));
        std::vector<std::pair<std::string, const CohnetPipeline*>> rows;
        for (std::size_t i = 0; i < pipes.size(); ++i) rows.emplace_back(entries[i].first, &pipes[i]);
        result = cross_region_matrix(rows, m, names);
      }
      fs::create_directories(out());
      write_text_atomic(out() / "matrix.csv", result.to_csv());
      std::cout << result.to_csv();
    };
  });

  // export
  auto* exp = app.add_subcommand("export", "Export a map as PGM and a scatter CSV");
  std::string pred_path, ref_path;
  ValueRange range{0.0, 60.0};
  exp->add_option("--pred", pred_path, "Predicted raster")->required();
  exp->add_option("--ref", ref_path, "Reference raster (enables the scatter CSV)");
  exp->add_option("--min", range.min, "Map range minimum")->capture_default_str();
  exp->add_option("--max", range.max, "Map range maximum")->capture_default_str();
  exp->callback([&] {
    action = [&] {
      reject_unused(cfg);
      const ScalarRaster pred = read_scalar_raster(pred_path);
      fs::create_directories(out());
      export_map_pgm(pred, out() / "map.pgm", range);
      if (!ref_path.empty()) export_scatter(pred, read_scalar_raster(ref_path), nullptr, out() / "scatter.csv");
    };
  });

  // repro-ordering
  auto* rep = app.add_subcommand("repro-ordering", "Raw vs compensated vs optimized coherence inversion");
  rep->callback([&] {
    action = [&] {
      OrderingOptions o;
      o.seed = g.seed;
      o.sim = sim_from(cfg);
      o.n_train = cfg.get("n_train", o.n_train);
      o.n_test = cfg.get("n_test", o.n_test);
      o.data = data_from(cfg, g.seed);
      o.nsm = nsm_grid_from(cfg);
      o.net = net_from(cfg);
      o.hyper = hyper_from(cfg);
      o.with_direct = cfg.get("with_direct", o.with_direct);
      reject_unused(cfg);
      const OrderingReport r = run_ordering(o, out());
      std::cout << r.to_json().dump(2) << "\n";
    };
  });

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Four-region cross-region benchmark");
  bench->callback([&] {
    action = [&] {
      CrossRegionOptions o;
      o.seed = g.seed;
      o.regions = benchmark_regions(cfg.get("width", 128), cfg.get("n_train", 2), cfg.get("n_test", 1));
      o.data = data_from(cfg, g.seed);
      o.nsm = nsm_grid_from(cfg);
      o.net = net_from(cfg);
      o.hyper = hyper_from(cfg);
      reject_unused(cfg);
      const CrossRegionReport r = run_cross_region(o, out());
      std::cout << r.matrix.to_csv();
    };
  });

  try {
    app.parse(argc, argv);
    if (!g.config.empty()) cfg = KeyValueConfig::load(g.config);
    if (action) action();
    return 0;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::NumericalAbort ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace cohnet
