#include "cohnet/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cohnet/nn/weights.hpp"
#include "cohnet/random.hpp"

namespace cohnet {

using nn::Tensor;

Surrogate make_surrogate(std::vector<int> hidden, double h_max) {
  Surrogate s;
  s.hidden = std::move(hidden);
  s.h_max = h_max;
  s.net = nn::build_mlp<float>(2, s.hidden, 1, nn::OutActivation::Identity);
  s.net.freeze();
  return s;
}

void save_surrogate(const Surrogate& s, const std::filesystem::path& path) {
  std::vector<float> meta{static_cast<float>(s.kz_scale), static_cast<float>(s.h_max),
                          static_cast<float>(s.hidden.size())};
  for (int h : s.hidden) meta.push_back(static_cast<float>(h));
  nn::save_weights(s.net, path, meta);
}

namespace {

std::vector<float> peek_metadata(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (bytes.size() < 4 || in.raw(4) != "CWT1") fail(ErrorKind::BadMagic, "not a CWT1 weight file");
  in.u32();
  const int rank = in.u8();
  if (rank != 1) fail(ErrorKind::ShapeMismatch, "weight metadata must be rank 1");
  const std::uint32_t n = in.u32();
  in.need(4ull * n);
  std::vector<float> meta(n);
  for (auto& v : meta) v = in.f32();
  return meta;
}

Tensor<float> features(const Surrogate& s, const NsmDataset& data, std::size_t first,
                       std::size_t count, const std::vector<std::size_t>* order) {
  Tensor<float> x({static_cast<int>(count), 2});
  for (std::size_t k = 0; k < count; ++k) {
    const auto& smp = data[order ? (*order)[first + k] : first + k];
    x.data[static_cast<Eigen::Index>(2 * k)] = smp.gamma_vol;
    x.data[static_cast<Eigen::Index>(2 * k + 1)] = static_cast<float>(smp.kz * s.kz_scale);
  }
  return x;
}

}  // namespace

Surrogate load_surrogate(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  const auto meta = peek_metadata(bytes);
  if (meta.size() < 3 || meta.size() != 3 + static_cast<std::size_t>(meta[2]))
    fail(ErrorKind::ShapeMismatch, "weight file does not describe a surrogate");
  std::vector<int> hidden;
  for (std::size_t i = 3; i < meta.size(); ++i) hidden.push_back(static_cast<int>(meta[i]));
  Surrogate s = make_surrogate(hidden, meta[1]);
  s.kz_scale = meta[0];
  nn::decode_weights(bytes, s.net);
  return s;
}

NsmDataset build_nsm_dataset(const std::vector<double>& kz_values, int grid_n, InversionMode mode,
                             const LutGrids* grids) {
  require(!kz_values.empty(), "surrogate dataset needs at least one kz value");
  require(grid_n >= 2, "surrogate grid needs at least two points");
  NsmDataset out;
  for (double kz : kz_values) {
    std::unique_ptr<InversionLut> lut;
    if (mode == InversionMode::Lut) {
      require(grids != nullptr, "LUT mode needs grids");
      std::vector<double> hv;
      for (double h : grids->hv_grid)
        if (h <= ambiguity_height(kz)) hv.push_back(h);
      lut = std::make_unique<InversionLut>(
          build_inversion_lut(kz, hv, grids->sigma_grid, grids->theta, grids->mu));
    }
    for (int i = 0; i < grid_n; ++i) {
      // quadratic spacing toward gamma = 1, where height falls off as sqrt(1 - gamma)
      const double t = 1.0 - static_cast<double>(i) / (grid_n - 1);
      const double g = 0.02 + (1.0 - 0.02) * (1.0 - t * t);
      const double h = mode == InversionMode::Sinc ? invert_height_sinc(g, kz)
                                                   : invert_height_lut_magnitude(g, *lut).hv;
      NsmSample smp{static_cast<float>(g), static_cast<float>(kz), static_cast<float>(h), false};
      smp.held_out = out.size() % 7 == 0;
      out.push_back(smp);
    }
  }
  return out;
}

NsmDataset build_nsm_dataset_from_scenes(const Manifest& m, const std::vector<std::string>& regions,
                                         std::size_t max_samples, std::uint64_t seed) {
  struct Pixel {
    float g, kz;
  };
  std::vector<Pixel> pool;
  for (const auto& name : regions) {
    for (const auto& rec : m.region(name).train_scenes) {
      const SceneSample sc = load_scene(m, rec);
      for (int r = 0; r < sc.volcorr.height(); ++r)
        for (int c = 0; c < sc.volcorr.width(); ++c)
          if (sc.volcorr.is_valid(r, c) && sc.kz.is_valid(r, c) && sc.mask(r, c))
            pool.push_back({sc.volcorr(r, c), sc.kz(r, c)});
    }
  }
  require(!pool.empty(), "no valid scene pixels for the surrogate dataset");
  Rng rng(seed, 7);
  for (std::size_t i = pool.size() - 1; i > 0; --i)
    std::swap(pool[i], pool[rng.below(i + 1)]);
  pool.resize(std::min(pool.size(), max_samples));
  NsmDataset out;
  out.reserve(pool.size());
  for (const auto& p : pool) {
    NsmSample smp{p.g, p.kz, static_cast<float>(invert_height_sinc(p.g, p.kz)), false};
    smp.held_out = out.size() % 7 == 0;
    out.push_back(smp);
  }
  return out;
}

std::vector<double> nsm_eval_samples(const Surrogate& s, const NsmDataset& data) {
  if (data.empty()) return {};
  const Tensor<float> y = s.net.forward(features(s, data, 0, data.size(), nullptr));
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = static_cast<double>(y.data[static_cast<Eigen::Index>(i)]) * s.h_max;
  return out;
}

NsmTrainReport train_nsm(Surrogate& s, const NsmDataset& data, const NsmHyper& hyper,
                         std::uint64_t seed) {
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!data[i].held_out) train_idx.push_back(i);
  require(!train_idx.empty(), "surrogate training set is empty");
  require(hyper.epochs >= 1 && hyper.batch_size >= 1, "invalid surrogate hyperparameters");

  s.net.freeze(false);
  nn::init_weights(s.net, derive_seed(seed, 1));
  const auto n = train_idx.size();
  const auto bs = static_cast<std::size_t>(hyper.batch_size);
  const std::size_t batches = (n + bs - 1) / bs;
  nn::AdamConfig adam = hyper.adam;
  adam.total_steps = static_cast<std::int64_t>(batches) * hyper.epochs;
  nn::AdamState<float> state(s.net, adam);

  NsmTrainReport report;
  std::vector<std::size_t> order = train_idx;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng rng(seed, 1000 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t first = b * bs;
      const std::size_t count = std::min(bs, n - first);
      nn::Tape<float> tape;
      const Tensor<float> y = s.net.forward(features(s, data, first, count, &order), &tape);
      Tensor<float> grad(y.shape);
      double loss = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        const double target = data[order[first + k]].target / s.h_max;
        const double e = y.data[static_cast<Eigen::Index>(k)] - target;
        loss += e * e;
        grad.data[static_cast<Eigen::Index>(k)] = static_cast<float>(2.0 * e / count);
      }
      loss /= static_cast<double>(count);
      if (!std::isfinite(loss))
        fail(ErrorKind::NumericalAbort, "surrogate loss is not finite at epoch " + std::to_string(epoch));
      loss_sum += loss;
      auto bw = s.net.backward(tape, grad);
      nn::adam_step(state, s.net, *bw.params);
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  s.net.freeze();

  const auto pred = nsm_eval_samples(s, data);
  double se_train = 0.0, se_held = 0.0;
  std::size_t n_train = 0, n_held = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = pred[i] - data[i].target;
    (data[i].held_out ? se_held : se_train) += e * e;
    ++(data[i].held_out ? n_held : n_train);
  }
  report.train_rmse = std::sqrt(se_train / std::max<std::size_t>(1, n_train));
  report.heldout_rmse = n_held ? std::sqrt(se_held / n_held) : 0.0;
  return report;
}

ScalarRaster nsm_predict(const Surrogate& s, const ScalarRaster& gamma_vol, const ScalarRaster& kz) {
  if (!gamma_vol.same_shape(kz)) fail(ErrorKind::ShapeMismatch, "gamma and kz rasters differ");
  const Mask valid = gamma_vol.valid() && kz.valid();
  const auto n = static_cast<int>(gamma_vol.size());
  Tensor<float> x({n, 2});
  for (int i = 0; i < n; ++i) {
    const bool ok = valid.data()[i];
    x.data[2 * i] = ok ? gamma_vol.values().data()[i] : 0.0f;
    x.data[2 * i + 1] = ok ? static_cast<float>(kz.values().data()[i] * s.kz_scale) : 0.0f;
  }
  const Tensor<float> y = s.net.forward(x);
  const float top = static_cast<float>(s.h_max);
  Grid<float> h(gamma_vol.height(), gamma_vol.width());
  for (int i = 0; i < n; ++i)
    h.data()[i] = std::clamp(y.data[i] * top, 0.0f, top);
  return ScalarRaster(std::move(h), valid);
}

RegionInputs region_test_inputs(const Manifest& m, const std::string& region) {
  RegionInputs in;
  in.name = region;
  for (const auto& rec : m.region(region).test_scenes) {
    SceneSample sc = load_scene(m, rec);
    in.gamma_vol.push_back(std::move(sc.volcorr));
    in.kz.push_back(std::move(sc.kz));
    in.mask.push_back(std::move(sc.mask));
  }
  return in;
}

std::string RmseMatrix::to_csv() const {
  std::string out = "model";
  for (const auto& c : cols) out += "," + c;
  out += "\n";
  char buf[32];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += rows[i];
    for (double v : values[i]) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

double RmseMatrix::row_max(std::size_t i) const {
  return *std::max_element(values.at(i).begin(), values.at(i).end());
}

RmseMatrix nsm_fidelity_matrix(const std::vector<std::pair<std::string, const Surrogate*>>& nsms,
                               const std::vector<RegionInputs>& regions) {
  require(!nsms.empty() && !regions.empty(), "fidelity matrix needs surrogates and regions");
  RmseMatrix m;
  for (const auto& r : regions) m.cols.push_back(r.name);
  // physical inversion is the oracle; compute it once per region
  std::vector<std::vector<ScalarRaster>> physical(regions.size());
  for (std::size_t j = 0; j < regions.size(); ++j)
    for (std::size_t k = 0; k < regions[j].gamma_vol.size(); ++k)
      physical[j].push_back(invert_raster(regions[j].gamma_vol[k], regions[j].kz[k]));

  for (const auto& [name, nsm] : nsms) {
    m.rows.push_back(name);
    std::vector<double> row;
    for (std::size_t j = 0; j < regions.size(); ++j) {
      double se = 0.0;
      std::int64_t count = 0;
      for (std::size_t k = 0; k < regions[j].gamma_vol.size(); ++k) {
        const ScalarRaster pred = nsm_predict(*nsm, regions[j].gamma_vol[k], regions[j].kz[k]);
        const Mask joint = pred.valid() && physical[j][k].valid() && regions[j].mask[k];
        const auto d = pred.values().cast<double>() - physical[j][k].values().cast<double>();
        se += joint.select(d.square(), 0.0).sum();
        count += joint.count();
      }
      if (count == 0) fail(ErrorKind::NoValidPixels, "region " + regions[j].name + " has no valid pixels");
      row.push_back(std::sqrt(se / static_cast<double>(count)));
    }
    m.values.push_back(std::move(row));
  }
  return m;
}

}  // namespace cohnet
