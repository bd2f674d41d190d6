#include <doctest.h>

#include "cohnet/experiments.hpp"
#include "cohnet/nn/weights.hpp"
#include "support.hpp"

using namespace cohnet;

namespace {

// One trained grid surrogate shared by the tests in this file.
const Surrogate& trained_nsm() {
  static const Surrogate s = [] {
    Surrogate out = make_surrogate();
    const NsmGridConfig cfg;
    train_nsm(out, build_nsm_dataset(cfg.kz_values, cfg.grid_n), cfg.hyper, 5);
    return out;
  }();
  return s;
}

double direct_rmse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("surrogate grid dataset layout") {
  const NsmDataset d = build_nsm_dataset({0.06, 0.09, 0.12}, 100);
  CHECK(d.size() == 300);
  CHECK(std::count_if(d.begin(), d.end(), [](const NsmSample& s) { return s.held_out; }) == 43);
  for (const auto& s : d) {
    CHECK(s.target <= ambiguity_height(s.kz) + 1e-3);
    CHECK(s.gamma_vol >= 0.02f);
    if (s.gamma_vol == 1.0f) CHECK(s.target == 0.0f);
  }
}

TEST_CASE("surrogate learns a constant zero target") {
  NsmDataset d = build_nsm_dataset({0.06, 0.09, 0.12}, 200);
  for (auto& s : d) s.target = 0.0f;
  Surrogate s = make_surrogate();
  NsmHyper h;
  h.epochs = 100;
  const NsmTrainReport r = train_nsm(s, d, h, 3);
  CHECK(r.heldout_rmse < 0.1);
  CHECK(s.net.frozen());
}

TEST_CASE("surrogate training is deterministic") {
  const auto dir = testing::scratch_dir("nsm_det");
  const NsmDataset d = build_nsm_dataset({0.08, 0.1}, 40);
  NsmHyper h;
  h.epochs = 20;
  Surrogate a = make_surrogate(), b = make_surrogate();
  train_nsm(a, d, h, 9);
  train_nsm(b, d, h, 9);
  save_surrogate(a, dir / "a.cwt");
  save_surrogate(b, dir / "b.cwt");
  CHECK(read_file(dir / "a.cwt") == read_file(dir / "b.cwt"));
  const Surrogate back = load_surrogate(dir / "a.cwt");
  CHECK(back.hidden == a.hidden);
  CHECK(back.h_max == a.h_max);
  CHECK(back.net.frozen());
}

TEST_CASE("trained surrogate agrees with the physical inversion") {
  const Surrogate& s = trained_nsm();
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<float> ug(0.02f, 1.0f), uk(0.06f, 0.12f);
  Grid<float> g(40, 40), k(40, 40);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g.data()[i] = ug(eng);
    k.data()[i] = uk(eng);
  }
  const ScalarRaster pred = nsm_predict(s, ScalarRaster(g), ScalarRaster(k));
  std::vector<double> a, b;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    a.push_back(pred.values().data()[i]);
    b.push_back(std::min(s.h_max, invert_height_sinc(g.data()[i], k.data()[i])));
  }
  const double e = direct_rmse(a, b);
  MESSAGE("surrogate vs physical RMSE " << e);
  CHECK(e <= 1.5);
  CHECK((pred.values() >= 0.0f).all());
  CHECK((pred.values() <= 60.0f).all());

  const ScalarRaster top = nsm_predict(s, ScalarRaster(8, 8, 1.0f), ScalarRaster(8, 8, 0.09f));
  CHECK(top.values().maxCoeff() <= 1.5f);

  Mask none = Mask::Constant(4, 4, false);
  CHECK(nsm_predict(s, ScalarRaster(Grid<float>::Constant(4, 4, 0.5f), none), ScalarRaster(4, 4, 0.1f))
            .valid_count() == 0);
  CHECK_THROWS_AS(nsm_predict(s, ScalarRaster(4, 4), ScalarRaster(5, 4)), Error);
}

TEST_CASE("trained surrogate does not invert the height trend") {
  const Surrogate& s = trained_nsm();
  for (double kz : {0.06, 0.09, 0.12}) {
    NsmDataset line;
    for (int i = 0; i < 200; ++i) line.push_back({0.02f + 0.98f * i / 199.0f, static_cast<float>(kz), 0.0f, false});
    const auto h = nsm_eval_samples(s, line);
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 0.5);
  }
}

TEST_CASE("fidelity matrix shape and diagonal") {
  const auto dir = testing::scratch_dir("fidelity");
  auto specs = benchmark_regions(64, 1, 1);
  specs.resize(2);
  build_dataset(specs, {}, dir);
  const Manifest m = load_manifest(dir / "manifest.json");
  std::vector<RegionInputs> inputs;
  for (const auto& r : specs) inputs.push_back(region_test_inputs(m, r.name));
  const RmseMatrix mat = nsm_fidelity_matrix({{"grid", &trained_nsm()}}, inputs);
  CHECK(mat.values.size() == 1);
  CHECK(mat.values[0].size() == 2);
  for (double v : mat.values[0]) CHECK(v <= 1.5);
  CHECK(mat.to_csv().rfind("model,north,coast\ngrid,", 0) == 0);
}

TEST_CASE("loss matches an independent masked RMSE") {
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<float> u(0.0f, 50.0f);
  std::vector<ScalarRaster> pred, ref;
  std::vector<Mask> mask;
  double se = 0.0, ae = 0.0;
  long n = 0;
  for (int k = 0; k < 3; ++k) {
    Grid<float> p(5, 6), r(5, 6);
    Mask m(5, 6);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p.data()[i] = u(eng);
      r.data()[i] = u(eng);
      m.data()[i] = eng() % 3 != 0;
      if (m.data()[i]) {
        const double e = static_cast<double>(p.data()[i]) - r.data()[i];
        se += e * e;
        ae += std::abs(e);
        ++n;
      }
    }
    pred.emplace_back(p);
    ref.emplace_back(r);
    mask.push_back(m);
  }
  CHECK(cohnet_loss(pred, ref, mask) == doctest::Approx(std::sqrt(se / n)).epsilon(1e-12));
  CHECK(cohnet_loss(pred, ref, mask, LossKind::SumRootLiteral) ==
        doctest::Approx(ae / std::sqrt(static_cast<double>(n))).epsilon(1e-12));

  Grid<float> a(1, 2), b(1, 2);
  a << 3, 4;
  b << 0, 0;
  const Mask all = Mask::Constant(1, 2, true);
  CHECK(cohnet_loss({ScalarRaster(a)}, {ScalarRaster(b)}, {all}) == doctest::Approx(std::sqrt(12.5)));
  CHECK(cohnet_loss({ScalarRaster(a)}, {ScalarRaster(a)}, {all}) == 0.0);
  Grid<float> c(1, 2);
  c << 3, 9;
  Mask one = all;
  one(0, 1) = false;
  CHECK(cohnet_loss({ScalarRaster(c)}, {ScalarRaster(a)}, {one}) == 0.0);
  CHECK_THROWS_AS(cohnet_loss({ScalarRaster(a)}, {ScalarRaster(a)}, {Mask::Constant(1, 2, false)}), Error);
}

TEST_CASE("composed pipeline gradient matches finite differences") {
  CHECK(testing::pipeline_fd_error(3) <= 1e-3);
  CHECK(testing::pipeline_fd_error(4, LossKind::SumRootLiteral) <= 1e-3);
}

TEST_CASE("pipeline outputs") {
  CohnetPipeline p = make_cohnet(trained_nsm(), {}, 4);
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Grid<float> g(32, 32);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = u(eng);
  Mask m = Mask::Constant(32, 32, true);
  m(3, 4) = false;
  const ScalarRaster coh(g, m), kz(32, 32, 0.1f);
  const CohnetOutput out = cohnet_forward(p, coh, kz);
  CHECK((out.gamma_opt.values() > 0.0f).all());
  CHECK((out.gamma_opt.values() < 1.0f).all());
  CHECK((out.height.values() >= 0.0f).all());
  CHECK((out.height.values() <= 60.0f).all());
  CHECK(out.height.values().isFinite().all());
  CHECK_FALSE(out.height.is_valid(3, 4));
  CHECK(out.height == nsm_predict(p.nsm, out.gamma_opt, kz));
  CHECK_THROWS_AS(cohnet_forward(p, coh, ScalarRaster(16, 32)), Error);
  CHECK_THROWS_AS(cohnet_forward(p, ScalarRaster(30, 30), ScalarRaster(30, 30)), Error);
}

TEST_CASE("training leaves the surrogate untouched and is deterministic") {
  const auto dir = testing::scratch_dir("train_det");
  save_surrogate(trained_nsm(), dir / "nsm.cwt");
  const auto before = nn::file_checksum(dir / "nsm.cwt");
  const auto batch = testing::toy_batch(6, 3);
  TrainHyper h;
  h.epochs = 3;
  h.batch_size = 4;
  CohnetPipeline a = make_cohnet(load_surrogate(dir / "nsm.cwt"), {}, 1);
  CohnetPipeline b = make_cohnet(load_surrogate(dir / "nsm.cwt"), {}, 1);
  const TrainLog la = train_pipeline(a, batch, h, 2);
  const TrainLog lb = train_pipeline(b, batch, h, 2);
  save_surrogate(a.nsm, dir / "nsm.cwt");
  CHECK(nn::file_checksum(dir / "nsm.cwt") == before);
  save_model(a, dir / "a.cwt");
  save_model(b, dir / "b.cwt");
  CHECK(read_file(dir / "a.cwt") == read_file(dir / "b.cwt"));
  for (std::size_t i = 0; i < la.epochs.size(); ++i) CHECK(la.epochs[i].train_loss == lb.epochs[i].train_loss);
  CHECK(la.to_csv().rfind("epoch,train_loss,lr,wall_seconds\n0,", 0) == 0);

  const CohnetPipeline back = load_model(dir / "a.cwt", &a.nsm);
  CHECK(cohnet_forward(back, batch[0].coherence, batch[0].kz).height ==
        cohnet_forward(a, batch[0].coherence, batch[0].kz).height);
  CHECK_THROWS_AS(load_model(dir / "a.cwt"), Error);

  a.nsm.net.freeze(false);
  CHECK_THROWS_AS(train_pipeline(a, batch, h, 2), Error);
}

TEST_CASE("direct model learns a zero target") {
  auto batch = testing::toy_batch(8, 5);
  for (auto& s : batch) s.reference = ScalarRaster(8, 8, 0.0f);
  CohnetPipeline d = make_direct({}, 60.0, 3);
  TrainHyper h;
  h.epochs = 150;
  h.batch_size = 8;
  h.adam.lr_start = 1e-2;
  h.adam.lr_end = 1e-3;
  const TrainLog log = train_pipeline(d, batch, h, 1);
  for (const auto& s : batch) CHECK(cohnet_forward(d, s.coherence, s.kz).height.values().maxCoeff() < 1.0f);
  CHECK(log.epochs.back().train_loss < log.epochs.front().train_loss);
}

TEST_CASE("non-finite loss aborts training") {
  auto batch = testing::toy_batch(2, 5);
  CohnetPipeline d = make_direct({}, 60.0, 3);
  d.first_net.layers()[0].weight.data[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_pipeline(d, batch, {}, 1);
    FAIL("expected a numerical abort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NumericalAbort);
  }
}
