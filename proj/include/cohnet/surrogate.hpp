#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cohnet/dataset.hpp"
#include "cohnet/nn/adam.hpp"
#include "cohnet/nn/network.hpp"
#include "cohnet/raster.hpp"
#include "cohnet/rvog.hpp"

namespace cohnet {

inline constexpr double kKzScale = 1.0 / 0.15;  // kz feature normalisation
inline constexpr double kDefaultHeightMax = 60.0;  // m

/// Neural surrogate of the physical height inversion: (gamma_vol, kz) -> h.
/// Features are [gamma_vol, kz * kz_scale]; the network output is h / h_max.
struct Surrogate {
  nn::Network<float> net;
  std::vector<int> hidden{64, 64, 64};
  double kz_scale = kKzScale;
  double h_max = kDefaultHeightMax;
};

Surrogate make_surrogate(std::vector<int> hidden = {64, 64, 64}, double h_max = kDefaultHeightMax);

/// Metadata tensor layout: [kz_scale, h_max, n_hidden, hidden...].
void save_surrogate(const Surrogate& s, const std::filesystem::path& path);
Surrogate load_surrogate(const std::filesystem::path& path);

struct NsmSample {
  float gamma_vol = 0.0f;
  float kz = 0.0f;
  float target = 0.0f;  // m
  bool held_out = false;
};

using NsmDataset = std::vector<NsmSample>;

/// gamma_vol on an even grid over [0.02, 1] for each kz, targets from the
/// physical inversion; every 7th sample (index % 7 == 0) is held out.
NsmDataset build_nsm_dataset(const std::vector<double>& kz_values, int grid_n,
                             InversionMode mode = InversionMode::Sinc,
                             const LutGrids* grids = nullptr);

/// Pixel samples of (volcorr, kz) from the training scenes of the listed
/// regions, at most `max_samples`, with physical-inversion targets.
NsmDataset build_nsm_dataset_from_scenes(const Manifest& m, const std::vector<std::string>& regions,
                                         std::size_t max_samples, std::uint64_t seed);

struct NsmHyper {
  int epochs = 1500;
  int batch_size = 32;
  nn::AdamConfig adam{};
};

struct NsmTrainReport {
  double train_rmse = 0.0;  // m, against the physical inversion
  double heldout_rmse = 0.0;  // m
  std::vector<double> epoch_loss;
};

NsmTrainReport train_nsm(Surrogate& s, const NsmDataset& data, const NsmHyper& hyper,
                         std::uint64_t seed);

/// Unclamped network heights for raw samples, in metres.
std::vector<double> nsm_eval_samples(const Surrogate& s, const NsmDataset& data);

/// Per-pixel surrogate heights, clamped to [0, h_max]; invalid pixels propagate.
ScalarRaster nsm_predict(const Surrogate& s, const ScalarRaster& gamma_vol, const ScalarRaster& kz);

struct RegionInputs {
  std::string name;
  std::vector<ScalarRaster> gamma_vol;
  std::vector<ScalarRaster> kz;
  std::vector<Mask> mask;
};

/// Test-scene (volcorr, kz) rasters for a manifest region.
RegionInputs region_test_inputs(const Manifest& m, const std::string& region);

struct RmseMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<double>> values;

  std::string to_csv() const;
  double row_max(std::size_t i) const;
};

/// RMSE of each surrogate against the sinc inversion on each region's inputs.
RmseMatrix nsm_fidelity_matrix(const std::vector<std::pair<std::string, const Surrogate*>>& nsms,
                               const std::vector<RegionInputs>& regions);

}  // namespace cohnet
