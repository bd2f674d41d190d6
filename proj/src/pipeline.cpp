#include "cohnet/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>

#include "cohnet/fileutil.hpp"
#include "cohnet/nn/weights.hpp"
#include "cohnet/parallel.hpp"
#include "cohnet/random.hpp"

namespace cohnet {

using nn::Tensor;

namespace {

template <typename S>
Tensor<S> input_tensor(const ScalarRaster& coherence, const ScalarRaster& kz, bool kz_input,
                       double kz_scale) {
  const int h = coherence.height(), w = coherence.width();
  const Eigen::Index hw = Eigen::Index{h} * w;
  Tensor<S> x({1, kz_input ? 2 : 1, h, w});
  for (Eigen::Index i = 0; i < hw; ++i) {
    const bool ok = coherence.valid().data()[i] && kz.valid().data()[i];
    x.data[i] = ok ? static_cast<S>(coherence.values().data()[i]) : S(0);
    if (kz_input) x.data[hw + i] = ok ? static_cast<S>(kz.values().data()[i] * kz_scale) : S(0);
  }
  return x;
}

template <typename S>
Tensor<S> nsm_features(const Tensor<S>& gamma, const ScalarRaster& kz, double kz_scale) {
  const auto n = static_cast<int>(gamma.size());
  Tensor<S> f({n, 2});
  for (int i = 0; i < n; ++i) {
    f.data[2 * i] = gamma.data[i];
    f.data[2 * i + 1] = kz.valid().data()[i] ? static_cast<S>(kz.values().data()[i] * kz_scale) : S(0);
  }
  return f;
}

// Forward state of one training sample.
template <typename S>
struct SampleState {
  nn::Tape<S> first_tape;
  nn::Tape<S> nsm_tape;
  Tensor<S> gamma;
  Eigen::Array<S, Eigen::Dynamic, 1> height;
};

template <typename S>
struct BatchResult {
  double loss = 0.0;
  std::int64_t n_valid = 0;
  std::optional<nn::Gradients<S>> grads;
};

Mask sample_mask(const PatchSample& s) {
  return s.mask && s.reference.valid() && s.coherence.valid() && s.kz.valid();
}

// Loss and first-network gradient over one batch. nsm == nullptr selects the
// direct head (height = h_max * first-net output).
template <typename S>
BatchResult<S> batch_step(const nn::Network<S>& first, const nn::Network<S>* nsm, bool kz_input,
                          double kz_scale, double h_max, const std::vector<const PatchSample*>& batch,
                          LossKind kind, bool want_grad) {
  const int b = static_cast<int>(batch.size());
  std::vector<SampleState<S>> st(batch.size());
  parallel_for(b, [&](int k) {
    const PatchSample& s = *batch[static_cast<std::size_t>(k)];
    auto& ss = st[static_cast<std::size_t>(k)];
    ss.gamma = first.forward(input_tensor<S>(s.coherence, s.kz, kz_input, kz_scale), &ss.first_tape);
    if (nsm) {
      const Tensor<S> out = nsm->forward(nsm_features(ss.gamma, s.kz, kz_scale), &ss.nsm_tape);
      ss.height = out.data * static_cast<S>(h_max);
    } else {
      ss.height = ss.gamma.data * static_cast<S>(h_max);
    }
  });

  // deterministic reduction in sample, then pixel, order
  std::vector<Mask> masks;
  double sum = 0.0;
  std::int64_t n = 0;
  for (int k = 0; k < b; ++k) {
    const PatchSample& s = *batch[static_cast<std::size_t>(k)];
    masks.push_back(sample_mask(s));
    const auto& h = st[static_cast<std::size_t>(k)].height;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      if (!masks.back().data()[i]) continue;
      const double e = static_cast<double>(h[i]) - s.reference.values().data()[i];
      sum += kind == LossKind::BatchRmse ? e * e : std::abs(e);
      ++n;
    }
  }
  BatchResult<S> r;
  r.n_valid = n;
  if (n == 0) return r;
  const double root_n = std::sqrt(static_cast<double>(n));
  r.loss = kind == LossKind::BatchRmse ? std::sqrt(sum / static_cast<double>(n)) : sum / root_n;
  if (!std::isfinite(r.loss)) fail(ErrorKind::NumericalAbort, "training loss is not finite");
  if (!want_grad) return r;

  std::vector<nn::Gradients<S>> per_sample(batch.size());
  parallel_for(b, [&](int k) {
    const PatchSample& s = *batch[static_cast<std::size_t>(k)];
    auto& ss = st[static_cast<std::size_t>(k)];
    const Mask& m = masks[static_cast<std::size_t>(k)];
    Tensor<S> dh({static_cast<int>(ss.height.size()), 1});
    for (Eigen::Index i = 0; i < ss.height.size(); ++i) {
      if (!m.data()[i]) continue;
      const double e = static_cast<double>(ss.height[i]) - s.reference.values().data()[i];
      double g = 0.0;
      if (kind == LossKind::BatchRmse)
        g = r.loss > 0.0 ? e / (static_cast<double>(n) * r.loss) : 0.0;
      else
        g = (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) / root_n;
      dh.data[i] = static_cast<S>(g * h_max);
    }
    Tensor<S> dgamma(ss.gamma.shape);
    if (nsm) {
      const auto back = nsm->backward(ss.nsm_tape, dh);
      for (Eigen::Index i = 0; i < dgamma.size(); ++i) dgamma.data[i] = back.input_grad.data[2 * i];
    } else {
      dgamma.data = dh.data;
    }
    auto fb = first.backward(ss.first_tape, dgamma);
    per_sample[static_cast<std::size_t>(k)] = std::move(*fb.params);
  });
  r.grads = std::move(per_sample[0]);
  for (std::size_t k = 1; k < per_sample.size(); ++k) *r.grads += per_sample[k];
  return r;
}

std::vector<float> model_metadata(const CohnetPipeline& p) {
  return {static_cast<float>(p.kind), static_cast<float>(p.config.in_channels()),
          static_cast<float>(p.config.base_ch), static_cast<float>(p.config.depth),
          static_cast<float>(p.kz_scale), static_cast<float>(p.h_max)};
}

}  // namespace

CohnetPipeline make_cohnet(const Surrogate& nsm, FirstNetConfig config, std::uint64_t seed) {
  CohnetPipeline p;
  p.kind = ModelKind::Cohnet;
  p.config = config;
  p.first_net = nn::build_unet<float>(config.in_channels(), config.base_ch, config.depth,
                                      nn::OutActivation::Sigmoid);
  nn::init_weights(p.first_net, seed);
  p.nsm = nsm;
  p.nsm.net.freeze();
  p.kz_scale = nsm.kz_scale;
  p.h_max = nsm.h_max;
  return p;
}

CohnetPipeline make_direct(FirstNetConfig config, double h_max, std::uint64_t seed) {
  CohnetPipeline p;
  p.kind = ModelKind::Direct;
  p.config = config;
  p.first_net = nn::build_unet<float>(config.in_channels(), config.base_ch, config.depth,
                                      nn::OutActivation::Sigmoid);
  nn::init_weights(p.first_net, seed);
  p.h_max = h_max;
  return p;
}

void save_model(const CohnetPipeline& p, const std::filesystem::path& path) {
  nn::save_weights(p.first_net, path, model_metadata(p));
}

CohnetPipeline load_model(const std::filesystem::path& path, const Surrogate* nsm) {
  const Bytes bytes = read_file(path);
  ByteReader in(bytes);
  if (bytes.size() < 4 || in.raw(4) != "CWT1") fail(ErrorKind::BadMagic, "not a CWT1 weight file");
  in.u32();
  if (in.u8() != 1 || in.u32() != 6) fail(ErrorKind::ShapeMismatch, "weight file is not a height model");
  float meta[6];
  for (float& v : meta) v = in.f32();
  FirstNetConfig cfg;
  cfg.kz_input = meta[1] == 2.0f;
  cfg.base_ch = static_cast<int>(meta[2]);
  cfg.depth = static_cast<int>(meta[3]);
  CohnetPipeline p;
  if (static_cast<int>(meta[0]) == static_cast<int>(ModelKind::Cohnet)) {
    if (!nsm) fail(ErrorKind::InvalidArgument, "CoHNet model needs its surrogate");
    p = make_cohnet(*nsm, cfg, 0);
  } else {
    p = make_direct(cfg, meta[5], 0);
  }
  p.kz_scale = meta[4];
  p.h_max = meta[5];
  nn::decode_weights(bytes, p.first_net);
  return p;
}

CohnetOutput cohnet_forward(const CohnetPipeline& p, const ScalarRaster& coherence,
                            const ScalarRaster& kz) {
  if (!coherence.same_shape(kz)) fail(ErrorKind::ShapeMismatch, "coherence and kz rasters differ");
  const Tensor<float> g =
      p.first_net.forward(input_tensor<float>(coherence, kz, p.config.kz_input, p.kz_scale));
  const Mask valid = coherence.valid() && kz.valid();
  Grid<float> gv = Eigen::Map<const Grid<float>>(g.ptr(), coherence.height(), coherence.width());
  CohnetOutput out{ScalarRaster(gv, valid), {}};
  if (p.kind == ModelKind::Cohnet) {
    out.height = nsm_predict(p.nsm, out.gamma_opt, kz);
  } else {
    const float top = static_cast<float>(p.h_max);
    out.height = ScalarRaster((gv * top).min(top).max(0.0f), valid);
  }
  return out;
}

double cohnet_loss(const std::vector<ScalarRaster>& predicted,
                   const std::vector<ScalarRaster>& reference, const std::vector<Mask>& mask,
                   LossKind kind) {
  if (predicted.size() != reference.size() || predicted.size() != mask.size())
    fail(ErrorKind::ShapeMismatch, "loss inputs differ in batch size");
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const Mask m = joint_mask(predicted[k], reference[k], &mask[k]);
    const auto d = predicted[k].values().cast<double>() - reference[k].values().cast<double>();
    sum += kind == LossKind::BatchRmse ? m.select(d.square(), 0.0).sum() : m.select(d.abs(), 0.0).sum();
    n += m.count();
  }
  if (n == 0) fail(ErrorKind::NoValidPixels, "loss over zero valid pixels");
  return kind == LossKind::BatchRmse ? std::sqrt(sum / static_cast<double>(n))
                                     : sum / std::sqrt(static_cast<double>(n));
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,train_loss,lr,wall_seconds\n";
  char buf[128];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.3f\n", e.epoch, e.train_loss, e.lr, e.wall_seconds);
    out += buf;
  }
  return out;
}

TrainLog train_pipeline(CohnetPipeline& p, const std::vector<PatchSample>& samples,
                        const TrainHyper& hyper, std::uint64_t seed, const EpochCallback& on_epoch) {
  require(!samples.empty(), "no training patches");
  require(hyper.epochs >= 1 && hyper.batch_size >= 1, "invalid training hyperparameters");
  if (p.kind == ModelKind::Cohnet && !p.nsm.net.frozen())
    fail(ErrorKind::InvalidArgument, "the surrogate must stay frozen during training");

  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = samples.size();
  const auto bs = static_cast<std::size_t>(hyper.batch_size);
  const std::size_t batches = (n + bs - 1) / bs;
  nn::AdamConfig adam = hyper.adam;
  adam.total_steps = static_cast<std::int64_t>(batches) * hyper.epochs;
  nn::AdamState<float> state(p.first_net, adam);
  const nn::Network<float>* nsm = p.kind == ModelKind::Cohnet ? &p.nsm.net : nullptr;

  TrainLog log;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng rng(seed, 5000 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    double loss_sum = 0.0;
    int counted = 0;
    double lr = state.current_lr();
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<const PatchSample*> batch;
      for (std::size_t k = b * bs; k < std::min(n, (b + 1) * bs); ++k) batch.push_back(&samples[order[k]]);
      BatchResult<float> r;
      try {
        r = batch_step(p.first_net, nsm, p.config.kz_input, p.kz_scale, p.h_max, batch, hyper.loss, true);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NumericalAbort) throw;
        fail(ErrorKind::NumericalAbort, std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                            ", batch " + std::to_string(b) + ")");
      }
      if (r.n_valid == 0) continue;
      lr = state.current_lr();
      nn::adam_step(state, p.first_net, *r.grads);
      loss_sum += r.loss;
      ++counted;
    }
    for (const auto& l : p.first_net.layers())
      if (!l.weight.all_finite() || !l.bias.all_finite())
        fail(ErrorKind::NumericalAbort, "non-finite weights after epoch " + std::to_string(epoch));
    EpochRecord rec{epoch, counted ? loss_sum / counted : 0.0, lr,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

std::vector<PatchSample> load_patches(const Manifest& m, const std::vector<std::string>& regions,
                                      bool train_split) {
  std::vector<PatchSample> out;
  for (const auto& name : regions) {
    const auto& r = m.region(name);
    for (const auto& rec : train_split ? r.train : r.test) out.push_back(load_patch(m, rec));
  }
  return out;
}

CohnetOutput predict_scene(const CohnetPipeline& p, const SceneSample& scene) {
  std::vector<ScalarRaster> gammas, heights;
  for (const auto& o : scene.grid.origins) {
    const int s = scene.grid.patch_size;
    auto out = cohnet_forward(p, crop(scene.coherence, o, s), crop(scene.kz, o, s));
    gammas.push_back(std::move(out.gamma_opt));
    heights.push_back(std::move(out.height));
  }
  return {reassemble_patches(gammas, scene.grid), reassemble_patches(heights, scene.grid)};
}

double region_rmse(const CohnetPipeline& p, const Manifest& m, const std::string& region,
                   bool test_split) {
  const auto& r = m.region(region);
  double se = 0.0;
  std::int64_t n = 0;
  for (const auto& rec : test_split ? r.test_scenes : r.train_scenes) {
    const SceneSample sc = load_scene(m, rec);
    const ScalarRaster h = predict_scene(p, sc).height;
    const Mask joint = joint_mask(h, sc.reference, &sc.mask);
    const auto d = h.values().cast<double>() - sc.reference.values().cast<double>();
    se += joint.select(d.square(), 0.0).sum();
    n += joint.count();
  }
  if (n == 0) fail(ErrorKind::NoValidPixels, "region " + region + " has no valid reference pixels");
  return std::sqrt(se / static_cast<double>(n));
}

RmseMatrix cross_region_matrix(
    const std::vector<std::pair<std::string, const CohnetPipeline*>>& models, const Manifest& m,
    const std::vector<std::string>& regions) {
  require(!models.empty() && !regions.empty(), "matrix needs models and regions");
  RmseMatrix out;
  out.cols = regions;
  for (const auto& [name, model] : models) {
    out.rows.push_back(name);
    std::vector<double> row;
    for (const auto& r : regions) row.push_back(region_rmse(*model, m, r, true));
    out.values.push_back(std::move(row));
  }
  return out;
}

PipelineGradient pipeline_gradient(const nn::Network<double>& first_net,
                                   const nn::Network<double>& nsm, double kz_scale, double h_max,
                                   const std::vector<PatchSample>& batch, LossKind loss) {
  std::vector<const PatchSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  const bool kz_input = first_net.layers().front().in == 2;
  auto r = batch_step<double>(first_net, &nsm, kz_input, kz_scale, h_max, ptrs, loss,
                              !first_net.frozen());
  PipelineGradient g;
  g.loss = r.loss;
  if (r.grads) g.first_net = std::move(*r.grads);
  return g;
}

}  // namespace cohnet
