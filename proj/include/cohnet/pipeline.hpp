#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cohnet/dataset.hpp"
#include "cohnet/metrics.hpp"
#include "cohnet/nn/adam.hpp"
#include "cohnet/nn/network.hpp"
#include "cohnet/surrogate.hpp"

namespace cohnet {

enum class ModelKind { Cohnet = 0, Direct = 1 };

struct FirstNetConfig {
  int base_ch = 8;
  int depth = 2;
  bool kz_input = true;  // false: coherence is the only input channel

  int in_channels() const { return kz_input ? 2 : 1; }
};

/// Coherence network followed by a height head. For CoHNet the head is the
/// frozen surrogate fed with (gamma_opt, kz); the direct baseline scales its
/// sigmoid output by h_max instead.
struct CohnetPipeline {
  ModelKind kind = ModelKind::Cohnet;
  FirstNetConfig config;
  nn::Network<float> first_net;
  Surrogate nsm;
  double kz_scale = kKzScale;
  double h_max = kDefaultHeightMax;
};

CohnetPipeline make_cohnet(const Surrogate& nsm, FirstNetConfig config, std::uint64_t seed);
CohnetPipeline make_direct(FirstNetConfig config, double h_max, std::uint64_t seed);

/// First-network weights; metadata [kind, in_ch, base_ch, depth, kz_scale, h_max].
void save_model(const CohnetPipeline& p, const std::filesystem::path& path);
/// CoHNet models need the surrogate they were trained with.
CohnetPipeline load_model(const std::filesystem::path& path, const Surrogate* nsm = nullptr);

struct CohnetOutput {
  ScalarRaster gamma_opt;  // in (0, 1)
  ScalarRaster height;  // m
};

/// Spatial dims must be multiples of 2^depth.
CohnetOutput cohnet_forward(const CohnetPipeline& p, const ScalarRaster& coherence,
                            const ScalarRaster& kz);

enum class LossKind {
  BatchRmse,  // sqrt(sum e^2 / N)
  SumRootLiteral,  // sum_i sqrt(e_i^2 / N)
};

/// Masked loss over all jointly valid pixels of the batch.
double cohnet_loss(const std::vector<ScalarRaster>& predicted,
                   const std::vector<ScalarRaster>& reference, const std::vector<Mask>& mask,
                   LossKind kind = LossKind::BatchRmse);

struct TrainHyper {
  int epochs = 100;
  int batch_size = 8;
  nn::AdamConfig adam{};
  LossKind loss = LossKind::BatchRmse;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string to_csv() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains the first network only. Per-epoch seeded shuffling; the last
/// partial batch is kept; gradients are reduced in sample order.
TrainLog train_pipeline(CohnetPipeline& p, const std::vector<PatchSample>& samples,
                        const TrainHyper& hyper, std::uint64_t seed,
                        const EpochCallback& on_epoch = {});

std::vector<PatchSample> load_patches(const Manifest& m, const std::vector<std::string>& regions,
                                      bool train_split = true);

/// Patch-wise prediction reassembled into a full scene.
CohnetOutput predict_scene(const CohnetPipeline& p, const SceneSample& scene);

/// Pooled masked RMSE over every scene of `region`'s split.
double region_rmse(const CohnetPipeline& p, const Manifest& m, const std::string& region,
                   bool test_split = true);

RmseMatrix cross_region_matrix(
    const std::vector<std::pair<std::string, const CohnetPipeline*>>& models, const Manifest& m,
    const std::vector<std::string>& regions);

/// Gradient of the batch loss for one pipeline, in double precision; used by
/// gradient checks.
struct PipelineGradient {
  double loss = 0.0;
  nn::Gradients<double> first_net;
};

PipelineGradient pipeline_gradient(const nn::Network<double>& first_net,
                                   const nn::Network<double>& nsm, double kz_scale, double h_max,
                                   const std::vector<PatchSample>& batch, LossKind loss);

}  // namespace cohnet
