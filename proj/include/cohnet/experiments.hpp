#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cohnet/pipeline.hpp"

namespace cohnet {

/// kz values and grid density of the surrogate training grid used by the
/// end-to-end experiments.
struct NsmGridConfig {
  std::vector<double> kz_values{0.05, 0.0633, 0.0767, 0.09, 0.1033, 0.1167, 0.13};
  int grid_n = 240;
  NsmHyper hyper = [] {
    NsmHyper h;
    h.epochs = 3000;
    h.adam.lr_start = 3e-3;
    return h;
  }();
};

/// Trains a surrogate on the analytic grid and writes it to `path`.
Surrogate train_grid_surrogate(const NsmGridConfig& cfg, std::uint64_t seed,
                               const std::filesystem::path& path, NsmTrainReport* report = nullptr);

struct OrderingOptions {
  std::uint64_t seed = 7;
  SimConfig sim{};
  int n_train = 4;
  int n_test = 1;
  DatasetOptions data{};
  NsmGridConfig nsm{};
  FirstNetConfig net{};
  TrainHyper hyper{};
  bool with_direct = true;
};

struct OrderingReport {
  double rmse_raw = 0.0;  // surrogate on |gamma|
  double rmse_volcorr = 0.0;  // surrogate on the budget-compensated gamma_vol
  double rmse_optimized = 0.0;  // CoHNet
  std::optional<double> rmse_direct;
  double nsm_heldout_rmse = 0.0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  std::uint64_t nsm_checksum_before = 0;
  std::uint64_t nsm_checksum_after = 0;

  nlohmann::ordered_json to_json() const;
};

/// Simulates one region, trains the surrogate, CoHNet and (optionally) the
/// direct baseline, and evaluates the three inversions on the test scenes.
/// Artifacts land in out_dir.
OrderingReport run_ordering(const OrderingOptions& opt, const std::filesystem::path& out_dir);

/// Masked RMSE of nsm(source raster, kz) against the reference over a split.
enum class SceneInput { Coherence, Volcorr };
double surrogate_region_rmse(const Surrogate& nsm, const Manifest& m, const std::string& region,
                             SceneInput input, bool test_split = true);

/// Four synthetic regions differing in height, budget and baseline.
std::vector<RegionSpec> benchmark_regions(int size = 128, int n_train = 2, int n_test = 1);

struct CrossRegionOptions {
  std::uint64_t seed = 7;
  std::vector<RegionSpec> regions = benchmark_regions();
  DatasetOptions data{};
  NsmGridConfig nsm{};
  FirstNetConfig net{};
  TrainHyper hyper{};
};

struct CrossRegionReport {
  RmseMatrix matrix;  // rows: one model per region, then "pooled"
  std::vector<double> self_train_rmse;  // per row, on its own training scenes
  std::vector<double> self_test_rmse;
};

CrossRegionReport run_cross_region(const CrossRegionOptions& opt,
                                   const std::filesystem::path& out_dir);

}  // namespace cohnet
