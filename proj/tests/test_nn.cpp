#include <doctest.h>

#include "cohnet/nn/adam.hpp"
#include "cohnet/nn/weights.hpp"
#include "support.hpp"

using namespace cohnet;
using namespace cohnet::nn;
using testing::Probe;
using testing::random_tensor;

namespace {

// Zero-padded 3x3 cross-correlation, written loop by loop.
Tensor<double> direct_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3), co = w.dim(0);
  Tensor<double> y({n, co, h, wd});
  auto at = [&](int s, int c, int r, int q) {
    if (r < 0 || q < 0 || r >= h || q >= wd) return 0.0;
    return x.data[((s * ci + c) * h + r) * wd + q];
  };
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < co; ++o)
      for (int r = 0; r < h; ++r)
        for (int q = 0; q < wd; ++q) {
          double acc = b.data[o];
          for (int c = 0; c < ci; ++c)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx)
                acc += w.data[((o * ci + c) * 3 + dy + 1) * 3 + dx + 1] * at(s, c, r + dy, q + dx);
          y.data[((s * co + o) * h + r) * wd + q] = acc;
        }
  return y;
}

void randomize(Network<double>& net, std::uint64_t seed) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layers()[i];
    if (!l.has_params()) continue;
    l.weight = random_tensor(l.weight.shape, seed + 2 * i);
    l.bias = random_tensor(l.bias.shape, seed + 2 * i + 1, -0.5, 0.5);
  }
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("dense identity and sigmoid midpoint") {
  Network<double> net;
  net.dense(2, 2);
  net.layers()[0].weight.data << 1, 0, 0, 1;
  const auto x = random_tensor({3, 2}, 1);
  CHECK((net.forward(x).data == x.data).all());

  Network<double> s;
  s.sigmoid();
  CHECK(s.forward(Tensor<double>({1, 1})).data[0] == 0.5);
  const auto sb = s.forward(Tensor<double>({1, 2}, Eigen::Array2d(800.0, -800.0)));
  CHECK(sb.data[0] < 1.0);
  CHECK(sb.data[1] > 0.0);
}

TEST_CASE("conv3x3 matches direct convolution") {
  Network<double> net;
  net.conv3x3(3, 4);
  randomize(net, 7);
  const auto x = random_tensor({2, 3, 5, 6}, 2);
  const auto y = net.forward(x);
  const auto ref = direct_conv(x, net.layers()[0].weight, net.layers()[0].bias);
  CHECK((y.data - ref.data).abs().maxCoeff() < 1e-12);

  Network<double> delta;
  delta.conv3x3(1, 1);
  delta.layers()[0].weight.data[4] = 1.0;
  const auto img = random_tensor({1, 1, 7, 4}, 3);
  CHECK((delta.forward(img).data == img.data).all());
}

TEST_CASE("pooling, upsampling and skip concatenation shapes") {
  Network<double> net;
  net.relu().maxpool2().upsample2().skip_concat(0);
  const auto x = random_tensor({1, 2, 4, 4}, 5);
  Tape<double> tape;
  const auto y = net.forward(x, &tape);
  CHECK(y.shape == Shape{1, 4, 4, 4});
  CHECK(tape.outputs.size() == net.size() + 1);
  CHECK(tape.outputs[0].data.isApprox(x.data));
  // channel block 2..3 is the ReLU output
  CHECK((y.data.segment(32, 32) == x.data.max(0.0)).all());
  // pooled maxima over each 2x2 block repeated back
  for (int c = 0; c < 2; ++c)
    for (int r = 0; r < 4; ++r)
      for (int q = 0; q < 4; ++q) {
        double m = 0.0;
        for (int dr = 0; dr < 2; ++dr)
          for (int dq = 0; dq < 2; ++dq)
            m = std::max(m, x.data[(c * 4 + (r / 2) * 2 + dr) * 4 + (q / 2) * 2 + dq]);
        CHECK(y.data[(c * 4 + r) * 4 + q] == m);
      }
  CHECK_THROWS_AS(net.forward(random_tensor({1, 2, 3, 4}, 1)), Error);
}

TEST_CASE("zero upstream gives zero gradients") {
  auto net = build_unet<double>(2, 2, 1, OutActivation::Sigmoid);
  init_weights(net, 3);
  Tape<double> tape;
  const auto y = net.forward(random_tensor({1, 2, 4, 4}, 1), &tape);
  const auto back = net.backward(tape, Tensor<double>(y.shape));
  CHECK((back.input_grad.data == 0.0).all());
  for (std::size_t i = 0; i < net.size(); ++i) {
    CHECK((back.params->weight[i].data == 0.0).all());
    CHECK((back.params->bias[i].data == 0.0).all());
  }
}

TEST_CASE("finite differences: dense network") {
  Network<double> net;
  net.dense(3, 4).relu().dense(4, 1);
  randomize(net, 11);
  const auto x = random_tensor({5, 3}, 4);
  const Probe probe({5, 1}, 9);
  CHECK(testing::max_layer_fd_error(net, x, probe) <= kTol);
  CHECK(testing::max_input_fd_error(net, x, probe) <= kTol);
}

TEST_CASE("finite differences: every layer type") {
  struct Case {
    const char* name;
    std::function<void(Network<double>&)> build;
    Shape in, out;
  };
  const std::vector<Case> cases = {
      {"dense", [](auto& n) { n.dense(4, 3); }, {2, 4}, {2, 3}},
      {"conv3x3", [](auto& n) { n.conv3x3(2, 3); }, {2, 2, 4, 5}, {2, 3, 4, 5}},
      {"relu", [](auto& n) { n.relu(); }, {3, 7}, {3, 7}},
      {"sigmoid", [](auto& n) { n.sigmoid(); }, {3, 7}, {3, 7}},
      {"maxpool2", [](auto& n) { n.maxpool2(); }, {1, 2, 4, 6}, {1, 2, 2, 3}},
      {"upsample2", [](auto& n) { n.upsample2(); }, {1, 2, 3, 2}, {1, 2, 6, 4}},
      {"skip_concat", [](auto& n) { n.conv3x3(2, 2).skip_concat(0); }, {1, 2, 3, 3}, {1, 4, 3, 3}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    Network<double> net;
    c.build(net);
    randomize(net, 21);
    const auto x = random_tensor(c.in, 6, -2.0, 2.0);
    const Probe probe(c.out, 8);
    CHECK(testing::max_input_fd_error(net, x, probe) <= kTol);
    CHECK(testing::max_layer_fd_error(net, x, probe) <= kTol);
  }
}

TEST_CASE("finite differences: small U-Net") {
  auto net = build_unet<double>(2, 2, 2, OutActivation::Sigmoid);
  init_weights(net, 31);
  testing::jitter_biases(net, 32);
  const auto x = random_tensor({1, 2, 8, 8}, 2);
  const Probe probe({1, 1, 8, 8}, 3);
  CHECK(testing::max_layer_fd_error(net, x, probe) <= kTol);
  CHECK(testing::max_input_fd_error(net, x, probe) <= kTol);
}

TEST_CASE("frozen networks still pass input gradients") {
  auto net = build_mlp<double>(2, {5}, 1, OutActivation::Identity);
  init_weights(net, 4);
  const auto x = random_tensor({4, 2}, 1);
  const Probe probe({4, 1}, 2);
  Tape<double> tape;
  net.forward(x, &tape);
  const auto open = net.backward(tape, probe.r);
  net.freeze();
  const auto shut = net.backward(tape, probe.r);
  CHECK(open.params.has_value());
  CHECK_FALSE(shut.params.has_value());
  CHECK((open.input_grad.data == shut.input_grad.data).all());
  AdamState<double> st(net, {});
  CHECK_THROWS_AS(adam_step(st, net, *open.params), Error);
}

TEST_CASE("adam first and second steps") {
  Network<double> net;
  net.dense(1, 1);
  net.layers()[0].weight.data[0] = 0.25;
  AdamConfig cfg;
  cfg.total_steps = 1;
  AdamState<double> st(net, cfg);

  auto grads = net.zero_gradients();
  adam_step(st, net, grads);
  CHECK(net.layers()[0].weight.data[0] == 0.25);

  AdamState<double> st2(net, cfg);
  grads.weight[0].data[0] = 1.0;
  adam_step(st2, net, grads);
  // m_hat = 1 and v_hat = 1 after bias correction
  const double first = 0.25 - net.layers()[0].weight.data[0];
  CHECK(std::abs(first - 1e-3 / (1.0 + 1e-8)) < 1e-12);
  CHECK(std::abs(first - 1e-3) < 1e-6);
  const double before = net.layers()[0].weight.data[0];
  adam_step(st2, net, grads);
  const double second = before - net.layers()[0].weight.data[0];
  CHECK(second > 0.0);
  CHECK(second <= first * 1.01);
}

TEST_CASE("learning rate decays linearly") {
  AdamConfig c;
  c.total_steps = 11;
  CHECK(c.learning_rate(0) == 1e-3);
  CHECK(c.learning_rate(10) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(c.learning_rate(5) == doctest::Approx(5.5e-4).epsilon(1e-12));
  CHECK(c.learning_rate(50) == doctest::Approx(1e-4).epsilon(1e-12));
}

TEST_CASE("initialisation bounds and determinism") {
  Network<double> net;
  net.dense(100, 100).relu().dense(100, 10);
  init_weights(net, 5);
  const double he = std::sqrt(6.0 / 100.0);
  CHECK(net.layers()[0].weight.data.abs().maxCoeff() <= he);
  CHECK(net.layers()[0].weight.data.abs().maxCoeff() > 0.9 * he);
  CHECK(net.layers()[2].weight.data.abs().maxCoeff() <= std::sqrt(6.0 / 110.0));
  CHECK((net.layers()[0].bias.data == 0.0).all());
  Network<double> again = net;
  init_weights(again, 5);
  CHECK((again.layers()[0].weight.data == net.layers()[0].weight.data).all());
  init_weights(again, 6);
  CHECK_FALSE((again.layers()[0].weight.data == net.layers()[0].weight.data).all());
}

TEST_CASE("U-Net shape chain and parameter count") {
  const auto net = build_unet<float>(2, 8, 2, OutActivation::Sigmoid);
  CHECK(net.spatial_multiple() == 4);
  auto conv = [](long in, long out) { return in * out * 9 + out; };
  const long expected = conv(2, 8) + conv(8, 8) + conv(8, 16) + conv(16, 16) + conv(16, 32) +
                        conv(32, 32) + conv(32 + 16, 16) + conv(16, 16) + conv(16 + 8, 8) +
                        conv(8, 8) + conv(8, 1);
  CHECK(net.parameter_count() == expected);
  CHECK(net.parameter_count() == 29753);

  auto init = net;
  init_weights(init, 1);
  const auto y = init.forward(Tensor<float>({1, 2, 64, 64}, Eigen::ArrayXf::Random(2 * 64 * 64)));
  CHECK(y.shape == Shape{1, 1, 64, 64});
  CHECK((y.data > 0.0f).all());
  CHECK((y.data < 1.0f).all());
  CHECK_THROWS_AS(init.forward(Tensor<float>({1, 2, 62, 64})), Error);
}

TEST_CASE("weight files round trip and reject mismatches") {
  auto net = build_unet<float>(2, 4, 1, OutActivation::Sigmoid);
  init_weights(net, 12);
  const auto dir = testing::scratch_dir("weights");
  save_weights(net, dir / "w.cwt", {1.5f, 2.0f});
  auto fresh = build_unet<float>(2, 4, 1, OutActivation::Sigmoid);
  CHECK(load_weights(dir / "w.cwt", fresh) == std::vector<float>{1.5f, 2.0f});
  const Tensor<float> x({1, 2, 8, 8}, Eigen::ArrayXf::LinSpaced(128, -1.0f, 1.0f));
  const auto a = net.forward(x), b = fresh.forward(x);
  CHECK(std::memcmp(a.ptr(), b.ptr(), sizeof(float) * 64) == 0);
  CHECK(encode_weights(net, {1.5f, 2.0f}) == read_file(dir / "w.cwt"));

  auto wrong = build_unet<float>(2, 8, 1, OutActivation::Sigmoid);
  try {
    load_weights(dir / "w.cwt", wrong);
    FAIL("expected a shape mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeMismatch);
  }
  auto bytes = read_file(dir / "w.cwt");
  bytes.resize(bytes.size() - 20);
  try {
    decode_weights(bytes, fresh);
    FAIL("expected truncation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Truncated);
  }
  auto flipped = read_file(dir / "w.cwt");
  flipped[40] ^= 0x01;
  CHECK_THROWS_AS(decode_weights(flipped, fresh), Error);
}

TEST_CASE("float and double networks agree") {
  auto net = build_unet<double>(1, 3, 1, OutActivation::Identity);
  init_weights(net, 2);
  const auto x = random_tensor({1, 1, 6, 6}, 4);
  const auto yd = net.forward(x);
  const auto yf = net.cast<float>().forward(x.cast<float>());
  CHECK((yd.data - yf.data.cast<double>()).abs().maxCoeff() < 1e-5);
}
