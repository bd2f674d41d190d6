#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "cohnet/coherence.hpp"
#include "cohnet/random.hpp"
#include "cohnet/rvog.hpp"
#include "cohnet/simulator.hpp"
#include "support.hpp"

using namespace cohnet;
using cd = std::complex<double>;

namespace {

// Independent quadrature of the volume integral ratio.
cd quadrature_volume(double hv, double kz, double sigma, double theta, double z0) {
  if (hv == 0.0) return std::polar(1.0, kz * z0);
  using boost::math::quadrature::gauss_kronrod;
  const double p = 2.0 * sigma / std::cos(theta);
  auto f = [&](double z) { return std::exp(p * z); };
  auto fr = [&](double z) { return std::exp(p * z) * std::cos(kz * z); };
  auto fi = [&](double z) { return std::exp(p * z) * std::sin(kz * z); };
  const double i0 = gauss_kronrod<double, 61>::integrate(f, 0.0, hv, 15, 1e-14);
  const double re = gauss_kronrod<double, 61>::integrate(fr, 0.0, hv, 15, 1e-14);
  const double im = gauss_kronrod<double, 61>::integrate(fi, 0.0, hv, 15, 1e-14);
  return std::polar(1.0, kz * z0) * cd(re, im) / i0;
}

ComplexRaster constant_gamma(int n, cd g) {
  return ComplexRaster(n, n, std::complex<float>(g));
}

double mean_magnitude(const ComplexRaster& g) {
  return g.values().abs().cast<double>().mean();
}

SlcPair pair_for(const ComplexRaster& gamma, std::uint64_t seed) {
  SyntheticScene s;
  s.true_gamma = gamma;
  return simulate_slc_pair(s, seed);
}

}  // namespace

TEST_CASE("coherence of identical and scaled images") {
  const SlcPair base = pair_for(constant_gamma(32, 0.3), 5);
  const ComplexRaster g = estimate_coherence({base.s1, base.s1});
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    CHECK(std::abs(g.values().data()[i]) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(std::arg(g.values().data()[i])) < 1e-6);
  }
  const std::complex<float> c(0.6f, -1.3f);
  const ComplexRaster scaled(base.s1.values() * c, base.s1.valid());
  const ComplexRaster gc = estimate_coherence({base.s1, scaled});
  const cd expect = std::conj(cd(c)) / std::abs(cd(c));
  for (Eigen::Index i = 0; i < gc.size(); ++i) {
    CHECK(std::abs(cd(gc.values().data()[i]) - expect) < 1e-5);
  }
  CHECK_THROWS_AS(estimate_coherence(base, 4), Error);
  CHECK_THROWS_AS(estimate_coherence(base, 1), Error);
}

TEST_CASE("coherence magnitudes are bounded and estimator bias shrinks with window") {
  const SlcPair p = pair_for(constant_gamma(128, 0.3), 9);
  double previous = 1.0;
  for (int w : {5, 7, 11}) {
    const ComplexRaster g = estimate_coherence(p, w);
    CHECK(g.values().abs().maxCoeff() <= 1.0f);
    const double bias = std::abs(mean_magnitude(g) - 0.3);
    CHECK(bias < previous);
    previous = bias;
  }
}

TEST_CASE("zero true coherence gives the known boxcar bias") {
  const SlcPair p = pair_for(constant_gamma(128, 0.0), 11);
  const double expected = std::sqrt(std::numbers::pi) / (2.0 * 7.0);
  CHECK(mean_magnitude(estimate_coherence(p, 7)) == doctest::Approx(expected).epsilon(0.03 / expected));
}

TEST_CASE("unit coherence gives identical SLCs") {
  const SlcPair p = pair_for(constant_gamma(16, 1.0), 2);
  CHECK(p.s1 == p.s2);
  const ComplexRaster g = estimate_coherence(p, 7);
  CHECK((g.values().abs() - 1.0f).abs().maxCoeff() < 1e-6f);
}

TEST_CASE("volume decorrelation arithmetic and monotonicity") {
  const ScalarRaster g(1, 1, 0.8f);
  CHECK(volume_decorrelation(g, {1.0, 1.0})(0, 0) == doctest::Approx(0.8));
  CHECK(volume_decorrelation(g, {0.9, 0.95})(0, 0) == doctest::Approx(0.8 * 0.95 / 0.9).epsilon(1e-6));
  CHECK(volume_decorrelation(ScalarRaster(1, 1, 0.99f), {0.9, 1.0})(0, 0) == 1.0f);
  CHECK_THROWS_AS(volume_decorrelation(g, {0.0, 1.0}), Error);

  Grid<float> v(1, 50);
  for (int i = 0; i < 50; ++i) v(0, i) = i / 49.0f;
  const ScalarRaster ramp(v);
  const auto a = volume_decorrelation(ramp, {0.9, 0.9});
  const auto b = volume_decorrelation(ramp, {0.9, 0.95});
  const auto c = volume_decorrelation(ramp, {0.95, 0.95});
  for (int i = 0; i < 50; ++i) {
    if (i > 0) CHECK(a(0, i) >= a(0, i - 1));
    CHECK(b(0, i) >= a(0, i));
    CHECK(c(0, i) <= b(0, i));
  }
}

TEST_CASE("snr decorrelation") {
  CHECK(snr_decorrelation(1.0) == 0.5);
  CHECK(snr_decorrelation(9.0) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(std::abs(snr_decorrelation(1e12) - 1.0) < 1e-9);
  CHECK_THROWS_AS(snr_decorrelation(0.0), Error);
}

TEST_CASE("volume coherence against quadrature") {
  const cd g = rvog_volume_coherence(RvogParams(20.0, 0.1));
  CHECK(std::abs(g) == doctest::Approx(std::sin(1.0)).epsilon(1e-9));
  CHECK(std::arg(g) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(g - quadrature_volume(20.0, 0.1, 0.0, kDefaultIncidence, 0.0)) < 1e-9);

  CHECK(rvog_volume_coherence(RvogParams(0.0, 0.1)) == cd(1.0, 0.0));
  CHECK(std::abs(rvog_volume_coherence(RvogParams(0.0, 0.1, 0.0, 0.0, 3.0)) - std::polar(1.0, 0.3)) < 1e-15);
  CHECK(std::abs(rvog_volume_coherence(RvogParams(2 * std::numbers::pi / 0.1, 0.1))) < 1e-9);

  for (double kz : {0.05, 0.1, 0.15}) {
    for (double hv : {1.0, 13.0, 37.0}) {
      for (double sigma : {0.0, 1e-9, 0.02, 0.3}) {
        const RvogParams p(hv, kz, sigma, 0.0, 2.5, 0.6);
        CHECK(std::abs(rvog_volume_coherence(p) - quadrature_volume(hv, kz, sigma, 0.6, 2.5)) < 1e-8);
      }
    }
  }
}

TEST_CASE("volume coherence is bounded and decreasing on the first branch") {
  std::mt19937_64 eng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double kz = 0.03 + 0.2 * u(eng);
    const RvogParams p(u(eng) * ambiguity_height(kz), kz, 0.5 * u(eng), 0.0, 10 * u(eng), 0.2 + 1.2 * u(eng));
    CHECK(std::abs(rvog_volume_coherence(p)) <= 1.0 + 1e-12);
  }
  const double kz = 0.1;
  double prev = 2.0;
  for (int i = 0; i < 1000; ++i) {
    const double hv = ambiguity_height(kz) * i / 1000.0;
    const double m = std::abs(rvog_volume_coherence(RvogParams(hv, kz)));
    CHECK(m < prev);
    prev = m;
  }
}

TEST_CASE("two-layer coherence") {
  const RvogParams p(23.0, 0.08, 0.05, 0.0, 1.5);
  const cd total = rvog_total_coherence(p);
  const cd vol = rvog_volume_coherence(p);
  CHECK(std::memcmp(&total, &vol, sizeof(cd)) == 0);
  CHECK(std::abs(std::abs(rvog_total_coherence(RvogParams(23.0, 0.08, 0.05, 1e12))) - 1.0) < 1e-9);
  // hv with sinc magnitude 0.6 and zero phase does not exist, so combine by hand
  const cd gv(0.6, 0.0);
  CHECK(std::abs((gv + 1.0) / 2.0 - cd(0.8, 0.0)) < 1e-15);
  const cd g1 = rvog_total_coherence(RvogParams(23.0, 0.08, 0.05, 1.0));
  const cd gv0 = rvog_volume_coherence(RvogParams(23.0, 0.08, 0.05, 0.0));
  CHECK(std::abs(g1 - (gv0 + 1.0) / 2.0) < 1e-15);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(RvogParams(-1.0, 0.1), Error);
  CHECK_THROWS_AS(RvogParams(10.0, 0.0), Error);
  CHECK_THROWS_AS(RvogParams(70.0, 0.1), Error);
  CHECK_THROWS_AS(RvogParams(10.0, 0.1, -0.1), Error);
  CHECK_THROWS_AS(RvogParams(10.0, 0.1, 0.0, -1.0), Error);
  CHECK_THROWS_AS(RvogParams(10.0, 0.1, 0.0, 0.0, 0.0, 1.6), Error);
  CHECK_THROWS_AS(RvogParams(30.0, 0.1, 0.0, 0.0, 0.0, 0.7, 25.0), Error);
}

TEST_CASE("sinc magnitude and inversion") {
  CHECK(sinc_magnitude(0.0, 0.1) == 1.0);
  CHECK(sinc_magnitude(2 * std::numbers::pi / 0.1, 0.1) < 1e-15);
  CHECK(sinc_magnitude(20.0, 0.1) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(sinc_magnitude(20.0, 0.1) == doctest::Approx(std::abs(quadrature_volume(20.0, 0.1, 0.0, 0.7, 0.0))).epsilon(1e-9));
  CHECK_THROWS_AS(sinc_magnitude(70.0, 0.1), Error);

  CHECK(invert_height_sinc(1.0, 0.1) == 0.0);
  CHECK(invert_height_sinc(0.0, 0.1) == ambiguity_height(0.1));
  CHECK(std::abs(invert_height_sinc(std::sin(1.0), 0.1) - 20.0) <= 1e-3);

  // root of sin(x)/x = 1/2 by an independent bracketing solver
  std::uintmax_t iters = 100;
  const auto [lo, hi] = boost::math::tools::toms748_solve(
      [](double x) { return std::sin(x) / x - 0.5; }, 1.0, 3.0,
      boost::math::tools::eps_tolerance<double>(50), iters);
  const double x = 0.5 * (lo + hi);
  CHECK(x == doctest::Approx(1.895494).epsilon(1e-6));
  CHECK(std::abs(invert_height_sinc(0.5, 0.1) - 2 * x / 0.1) <= 1e-2);
  CHECK(std::abs(invert_height_sinc(0.5, 0.1) - 37.916) <= 1e-2);

  for (double kz : {0.05, 0.10, 0.15}) {
    for (int i = 0; i <= 200; ++i) {
      const double h = ambiguity_height(kz) * i / 200.0;
      CHECK(std::abs(invert_height_sinc(sinc_magnitude(h, kz), kz) - h) <= 1e-3);
    }
  }
}

TEST_CASE("inversion lookup tables") {
  const InversionLut one = build_inversion_lut(0.1, {0.0}, {0.0});
  REQUIRE(one.table.size() == 1);
  CHECK(one.table[0] == cd(1.0, 0.0));
  CHECK_THROWS_AS(build_inversion_lut(0.1, {}, {0.0}), Error);

  std::vector<double> hv;
  for (double h = 0.0; h <= 60.0; h += 0.5) hv.push_back(h);
  const InversionLut row = build_inversion_lut(0.1, hv, {0.0});
  for (std::size_t i = 0; i < hv.size(); ++i)
    CHECK(std::abs(row.at(i, 0)) == doctest::Approx(sinc_magnitude(hv[i], 0.1)).epsilon(1e-12));

  std::vector<double> sig;
  for (double s = 0.0; s <= 0.2 + 1e-12; s += 0.01) sig.push_back(s);
  const InversionLut lut = build_inversion_lut(0.1, hv, sig);
  for (const auto& v : lut.table) CHECK(std::abs(v) <= 1.0 + 1e-12);

  const auto exact = invert_height_lut(lut.at(17, 4), lut);
  CHECK(exact.hv == hv[17]);
  CHECK(exact.sigma == sig[4]);
  const auto ground = invert_height_lut(cd(1.0, 0.0), lut);
  CHECK(ground.hv == 0.0);
  CHECK(ground.sigma == 0.0);

  const cd obs = rvog_total_coherence(RvogParams(25.0, 0.1, 0.05)) + cd(1e-4, -1e-4);
  std::size_t bi = 0, bj = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < hv.size(); ++i)
    for (std::size_t j = 0; j < sig.size(); ++j)
      if (std::abs(lut.at(i, j) - obs) < best) best = std::abs(lut.at(i, j) - obs), bi = i, bj = j;
  const auto found = invert_height_lut(obs, lut);
  CHECK(found.hv == hv[bi]);
  CHECK(found.sigma == sig[bj]);
  CHECK(found.hv == 25.0);
  CHECK(found.sigma == doctest::Approx(0.05));

  const auto dir = testing::scratch_dir("lut");
  write_lut(lut, dir / "t.clut");
  const InversionLut back = read_lut(dir / "t.clut");
  CHECK(back.hv_grid == lut.hv_grid);
  CHECK(back.sigma_grid == lut.sigma_grid);
  CHECK(back.table == lut.table);
  CHECK(back.kz == lut.kz);
}

TEST_CASE("raster inversion") {
  Grid<float> h(4, 5), g(4, 5);
  for (int i = 0; i < 20; ++i) {
    h.data()[i] = 2.5f * i;
    g.data()[i] = static_cast<float>(sinc_magnitude(h.data()[i], 0.09));
  }
  Mask m = Mask::Constant(4, 5, true);
  m(2, 3) = false;
  const ScalarRaster kz(5, 4, 0.09f);
  const ScalarRaster out = invert_raster(ScalarRaster(g, m), kz);
  CHECK(out.valid().cwiseEqual(m).all());
  for (int i = 0; i < 20; ++i)
    if (m.data()[i]) CHECK(std::abs(out.values().data()[i] - invert_height_sinc(g.data()[i], 0.09)) < 1e-4);
  // f32 storage limits the round trip at the flat top of the sinc
  for (int i = 5; i < 20; ++i)
    if (m.data()[i]) CHECK(std::abs(out.values().data()[i] - h.data()[i]) < 5e-2);

  const ScalarRaster ones = invert_raster(ScalarRaster(5, 4, 1.0f), kz);
  CHECK((ones.values() == 0.0f).all());

  LutGrids grids;
  for (double x = 0.0; x <= 80.0; x += 0.25) grids.hv_grid.push_back(x);
  grids.sigma_grid = {0.0};
  const ScalarRaster lut_out = invert_raster(ScalarRaster(g, m), kz, InversionMode::Lut, 1e-3, &grids);
  for (int i = 0; i < 20; ++i)
    if (m.data()[i]) CHECK(std::abs(lut_out.values().data()[i] - out.values().data()[i]) <= 0.25);
}

TEST_CASE("random source is reproducible and well distributed") {
  Rng a(42, 3), b(42, 3), c(42, 4);
  double sum = 0.0, sq = 0.0;
  bool differs = false;
  for (int i = 0; i < 20000; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs |= x != c.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(differs);
  CHECK(std::abs(sum / 20000) < 0.03);
  CHECK(sq / 20000 == doctest::Approx(1.0).epsilon(0.03));
  for (int i = 0; i < 1000; ++i) CHECK(a.below(7) < 7);
}

TEST_CASE("height field statistics and determinism") {
  SimConfig cfg;
  cfg.seed = 21;
  const HeightField f = synth_height_field(cfg);
  const HeightField f2 = synth_height_field(cfg);
  CHECK(f.heights == f2.heights);
  CHECK((f.forest == f2.forest).all());

  const double n = static_cast<double>(f.forest.count());
  CHECK(n / f.forest.size() == doctest::Approx(0.85).epsilon(0.02 / 0.85));
  const auto hv = f.heights.values().cast<double>();
  const double mean = f.forest.select(hv, 0.0).sum() / n;
  const double sd = std::sqrt(f.forest.select((hv - mean).square(), 0.0).sum() / n);
  CHECK(std::abs(mean - 33.0) <= 1.0);
  CHECK(std::abs(sd - 10.0) <= 1.5);
  CHECK((f.forest || hv == 0.0).all());

  cfg.height_spread = 0.0;
  const HeightField flat = synth_height_field(cfg);
  CHECK((flat.forest.select(flat.heights.values(), 33.0f) == 33.0f).all());
}

TEST_CASE("scene coherence is recomputable from heights") {
  SimConfig cfg;
  cfg.seed = 5;
  cfg.width = cfg.height = 64;
  cfg.sigma = 0.03;
  const SyntheticScene s = make_scene(cfg);
  CHECK(s.kz >= cfg.kz_min);
  CHECK(s.kz <= cfg.kz_max);
  CHECK((s.kz_map.values() == static_cast<float>(s.kz)).all());
  CHECK(s.height_map.values().maxCoeff() <= ambiguity_height(s.kz) - kAmbiguityMargin);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      const cd expect = cfg.budget.product() *
                        rvog_total_coherence(RvogParams(s.height_map(r, c), s.kz, cfg.sigma, 0.0, 0.0, cfg.theta));
      const auto got = s.true_gamma(r, c);
      CHECK(got == std::complex<float>(expect));
      CHECK(std::abs(got) <= 1.0f);
    }
  }
}

TEST_CASE("reference heights") {
  SimConfig cfg;
  cfg.seed = 8;
  cfg.width = cfg.height = 128;
  const SyntheticScene s = make_scene(cfg);
  const ScalarRaster clean = make_reference_heights(s, 0.0, 1);
  CHECK(clean.valid().cwiseEqual(s.forest_mask).all());
  CHECK((s.forest_mask.select(clean.values() - s.height_map.values(), 0.0f) == 0.0f).all());

  const ScalarRaster noisy = make_reference_heights(s, 1.0, 1);
  const double n = static_cast<double>(s.forest_mask.count());
  REQUIRE(n >= 1e4);
  const auto d = (noisy.values() - s.height_map.values()).cast<double>();
  const double r = std::sqrt(s.forest_mask.select(d.square(), 0.0).sum() / n);
  CHECK(std::abs(r - 1.0) <= 0.05);
}

TEST_CASE("constant coherence 0.7 is recovered on a simulated pair") {
  const SlcPair p = pair_for(constant_gamma(256, 0.7), 77);
  const double m = mean_magnitude(estimate_coherence(p, 7));
  CHECK(m >= 0.65);
  CHECK(m <= 0.75);
}
