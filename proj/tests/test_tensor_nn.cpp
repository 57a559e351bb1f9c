#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "llseg/tensor_nn.hpp"

using namespace llseg;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                     double scale = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(-scale, scale);
  for (double& x : t.v) x = d(rng);
  return t;
}

// Brute-force same-padding cross-correlation, written independently of the
// production kernel.
Tensor conv2d_oracle(const Tensor& in, const ConvLayer& l) {
  const std::size_t co = l.out_channels(), ci = l.in_channels(), k = l.ksize();
  const std::size_t h = in.shape[1], w = in.shape[2];
  const long half = static_cast<long>(k / 2);
  Tensor out({co, h, w});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double acc = l.b.v[o];
        for (std::size_t c = 0; c < ci; ++c)
          for (long du = -half; du <= half; ++du)
            for (long dv = -half; dv <= half; ++dv) {
              const long y = static_cast<long>(i) + du;
              const long x = static_cast<long>(j) + dv;
              if (y < 0 || x < 0 || y >= static_cast<long>(h) ||
                  x >= static_cast<long>(w))
                continue;
              acc += l.w.at4(o, c, static_cast<std::size_t>(du + half),
                             static_cast<std::size_t>(dv + half)) *
                     in.at3(c, static_cast<std::size_t>(y),
                            static_cast<std::size_t>(x));
            }
        out.at3(o, i, j) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("tensor arithmetic and shape checks") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {4, 3, 2, 1});
  Tensor s = a + b;
  for (double x : s.v) CHECK(x == doctest::Approx(5.0));
  Tensor d = a - b;
  CHECK(d.v[0] == doctest::Approx(-3.0));
  Tensor m = 2.0 * a;
  CHECK(m.v[3] == doctest::Approx(8.0));
  Tensor c({4});
  CHECK_THROWS_AS(a + c, std::invalid_argument);
  CHECK(a.all_finite());
  a.v[0] = std::nan("");
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("conv2d matches the brute-force oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    ConvLayer layer(3, 2, 3);
    layer.init(rng);
    Tensor in = random_tensor({2, 6, 5}, rng);
    Tensor got = conv2d(in, layer);
    Tensor want = conv2d_oracle(in, layer);
    REQUIRE(got.same_shape(want));
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got.v[i] == doctest::Approx(want.v[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d identity kernel passes input through") {
  ConvLayer layer(1, 1, 3);
  layer.w.v.assign(9, 0.0);
  layer.w.at4(0, 0, 1, 1) = 1.0;
  layer.b.v[0] = 0.0;
  std::mt19937_64 rng(3);
  Tensor in = random_tensor({1, 4, 4}, rng);
  Tensor out = conv2d(in, layer);
  for (std::size_t i = 0; i < in.size(); ++i)
    CHECK(out.v[i] == doctest::Approx(in.v[i]));
}

TEST_CASE("conv2d gradient check") {
  std::mt19937_64 rng(11);
  ConvLayer layer(2, 2, 3);
  layer.init(rng);
  Tensor in = random_tensor({2, 5, 5}, rng);
  Tensor target = random_tensor({2, 5, 5}, rng);

  auto loss = [&]() {
    Tensor out = conv2d(in, layer);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double e = out.v[i] - target.v[i];
      s += 0.5 * e * e;
    }
    return s;
  };
  Tensor out = conv2d(in, layer);
  Tensor g_out = out - target;
  ConvGrads g = conv2d_backward(g_out, in, layer);

  GradCheckReport r = grad_check(loss, {&layer.w, &layer.b, &in},
                                 {&g.weights, &g.bias, &g.input}, 1e-5);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("relu and its backward") {
  Tensor in({1, 2, 2}, {-1.0, 0.0, 2.0, -0.5});
  Tensor out = relu(in);
  CHECK(out.v == std::vector<double>{0.0, 0.0, 2.0, 0.0});
  Tensor g({1, 2, 2}, {1.0, 1.0, 1.0, 1.0});
  Tensor gi = relu_backward(g, in);
  CHECK(gi.v == std::vector<double>{0.0, 0.0, 1.0, 0.0});
}

TEST_CASE("softmax over channels: normalization and invariance") {
  std::mt19937_64 rng(5);
  Tensor in = random_tensor({4, 3, 3}, rng, 3.0);
  Tensor sm = softmax_over_channels(in);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(sm.at3(c, i, j) > 0.0);
        s += sm.at3(c, i, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  // shifting logits by a constant leaves the softmax unchanged
  Tensor shifted = in;
  for (double& x : shifted.v) x += 100.0;
  Tensor sm2 = softmax_over_channels(shifted);
  for (std::size_t i = 0; i < sm.size(); ++i)
    CHECK(sm2.v[i] == doctest::Approx(sm.v[i]).epsilon(1e-10));
}

TEST_CASE("softmax backward gradient check") {
  std::mt19937_64 rng(13);
  Tensor in = random_tensor({3, 2, 2}, rng);
  Tensor coef = random_tensor({3, 2, 2}, rng);

  auto loss = [&]() {
    Tensor sm = softmax_over_channels(in);
    double s = 0.0;
    for (std::size_t i = 0; i < sm.size(); ++i) s += coef.v[i] * sm.v[i];
    return s;
  };
  Tensor sm = softmax_over_channels(in);
  Tensor g = softmax_over_channels_backward(coef, sm);
  GradCheckReport r = grad_check(loss, {&in}, {&g}, 1e-6);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("global average pool and backward") {
  Tensor in({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  std::vector<double> p = global_avg_pool(in);
  REQUIRE(p.size() == 2);
  CHECK(p[0] == doctest::Approx(2.5));
  CHECK(p[1] == doctest::Approx(25.0));
  Tensor g = global_avg_pool_backward({4.0, 8.0}, {2, 2, 2});
  CHECK(g.at3(0, 0, 0) == doctest::Approx(1.0));
  CHECK(g.at3(1, 1, 1) == doctest::Approx(2.0));
}

TEST_CASE("linear layer gradient check") {
  std::mt19937_64 rng(17);
  LinearLayer layer(3, 4);
  layer.init(rng);
  std::vector<double> in(4);
  for (double& x : in) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  std::vector<double> coef(3);
  for (double& x : coef) x = std::uniform_real_distribution<double>(-1, 1)(rng);

  auto loss = [&]() {
    std::vector<double> out = linear(in, layer);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += coef[i] * out[i];
    return s;
  };
  LinearGrads g = linear_backward(coef, in, layer);
  GradCheckReport r = grad_check(loss, {&layer.w, &layer.b},
                                 {&g.weights, &g.bias}, 1e-6);
  CHECK(r.max_rel_error < 1e-6);
  // analytic input grad: w^T coef
  for (std::size_t j = 0; j < 4; ++j) {
    double want = 0.0;
    for (std::size_t i = 0; i < 3; ++i) want += layer.w.v[i * 4 + j] * coef[i];
    CHECK(g.input[j] == doctest::Approx(want));
  }
}

TEST_CASE("sgd_step applies lr * grad and lr = 0 is a no-op") {
  Tensor p({2}, {1.0, -2.0});
  Tensor g({2}, {0.5, 0.25});
  sgd_step({&p}, {&g}, 0.1);
  CHECK(p.v[0] == doctest::Approx(0.95));
  CHECK(p.v[1] == doctest::Approx(-2.025));
  Tensor before = p;
  sgd_step({&p}, {&g}, 0.0);
  CHECK(p.v == before.v);
}

TEST_CASE("grad_check flags a wrong gradient") {
  Tensor p({1}, {2.0});
  auto loss = [&]() { return p.v[0] * p.v[0]; };
  Tensor good({1}, {4.0});
  Tensor bad({1}, {3.0});
  CHECK(grad_check(loss, {&p}, {&good}, 1e-6).max_rel_error < 1e-6);
  CHECK(grad_check(loss, {&p}, {&bad}, 1e-6).max_rel_error > 0.2);
}

TEST_CASE("init_uniform is seeded and bounded") {
  Tensor a({100}), b({100});
  std::mt19937_64 r1(42), r2(42);
  init_uniform(a, 4, r1);
  init_uniform(b, 4, r2);
  CHECK(a.v == b.v);
  for (double x : a.v) CHECK(std::abs(x) <= 0.5);
}
