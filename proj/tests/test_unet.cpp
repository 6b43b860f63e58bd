#include <doctest.h>

#include "nld/error.hpp"
#include "nld/mri_operator.hpp"
#include "nld/unet.hpp"
#include "oracles.hpp"

using namespace nld;

namespace {

UNetConfig tiny(std::uint64_t seed = 3) {
  UNetConfig c;
  c.depth = 2;
  c.filters = 4;
  c.kernel = 3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("unet") {
  TEST_CASE("same seed gives identical parameters, different seed does not") {
    const NetworkParams a = build_unet(tiny(11));
    const NetworkParams b = build_unet(tiny(11));
    const NetworkParams c = build_unet(tiny(12));
    CHECK(a.flatten() == b.flatten());
    CHECK(a.flatten() != c.flatten());
  }

  TEST_CASE("parameter count follows the layer arithmetic") {
    // depth 2, F=4, k=3, two image channels. (in, out, k) per conv:
    //   enc0_a 2->4, enc0_b 4->4, down0 4->4, enc1_a 4->4, enc1_b 4->4,
    //   up0 4->4, dec0_a 8->4, dec0_b 4->4, final 4->2 with k=1.
    const int layers[][3] = {{2, 4, 3}, {4, 4, 3}, {4, 4, 3}, {4, 4, 3}, {4, 4, 3},
                             {4, 4, 3}, {8, 4, 3}, {4, 4, 3}, {4, 2, 1}};
    std::size_t expected = 0;
    for (const auto& l : layers) expected += static_cast<std::size_t>(l[0] * l[1] * l[2] * l[2] + l[1]);
    CHECK(expected == 1266);
    CHECK(build_unet(tiny()).count() == expected);
  }

  TEST_CASE("biases start at zero, weights within the fan-in bound") {
    const NetworkParams p = build_unet(tiny());
    for (const auto& t : p.tensors) {
      if (t.name.ends_with(".bias")) {
        for (double v : t.value.data()) CHECK(v == 0.0);
      } else {
        const auto& s = t.value.shape();
        const double bound = 1.0 / std::sqrt(static_cast<double>(s[1] * s[2] * s[3]));
        for (double v : t.value.data()) CHECK(std::abs(v) <= bound);
      }
    }
  }

  TEST_CASE("flatten and assign_flat round-trip") {
    NetworkParams p = build_unet(tiny());
    auto flat = p.flatten();
    for (auto& v : flat) v *= -2.0;
    p.assign_flat(flat);
    CHECK(p.flatten() == flat);
    CHECK_THROWS_AS(p.assign_flat(std::vector<double>(3)), Error);
  }

  TEST_CASE("forward output shape and validation") {
    const NetworkParams p = build_unet(tiny());
    Rng rng(1);
    const Tensor y = unet_eval(p, oracle::random_tensor({2, 8, 12}, rng));
    CHECK(y.shape() == Shape{2, 8, 12});
    CHECK_THROWS_AS(unet_eval(p, Tensor({2, 7, 8})), Error);
    CHECK_THROWS_AS(unet_eval(p, Tensor({3, 8, 8})), Error);
    Tensor bad({2, 8, 8});
    bad[5] = std::nan("");
    CHECK_THROWS_AS(unet_eval(p, bad), Error);
  }

  TEST_CASE("config validation") {
    UNetConfig c = tiny();
    c.depth = 1;
    CHECK_THROWS_AS(build_unet(c), Error);
    c = tiny();
    c.kernel = 4;
    CHECK_THROWS_AS(build_unet(c), Error);
    c = tiny();
    c.filters = 0;
    CHECK_THROWS_AS(build_unet(c), Error);
  }

  TEST_CASE("forward is bitwise deterministic") {
    const NetworkParams p = build_unet(tiny());
    Rng rng(2);
    const Tensor x = oracle::random_tensor({2, 8, 8}, rng);
    CHECK(unet_eval(p, x) == unet_eval(p, x));
  }

  TEST_CASE("param_l2") {
    NetworkParams p = build_unet(tiny());
    p.assign_flat(std::vector<double>(p.count(), 0.0));
    CHECK(param_l2(p) == 0.0);

    std::vector<double> flat(p.count(), 0.0);
    flat[0] = 3.0;
    flat[flat.size() - 1] = 4.0;
    p.assign_flat(flat);
    CHECK(param_l2(p) == 25.0);

    const NetworkParams q = build_unet(tiny(5));
    const auto f = q.flatten();
    double dot = 0.0;
    for (double v : f) dot += v * v;
    CHECK(param_l2(q) == doctest::Approx(dot).epsilon(1e-14));
  }

  TEST_CASE("network gradients against finite differences") {
    // Loss = <unet(x), c> with random c; checked on a random subset of
    // parameters for speed (the full sweep lives in the acceptance suite).
    const NetworkParams p = build_unet(tiny(7));
    Rng rng(3);
    const Tensor x = oracle::random_tensor({2, 8, 8}, rng);
    const Tensor c = oracle::random_tensor({2, 8, 8}, rng);

    Tape tape;
    const UNetOutput out = unet_forward(p, x, tape);
    tape.backward(dot_const(tape, out.output, c));
    std::vector<double> ad;
    for (const Var v : out.params) {
      const auto& g = tape.grad(v).data();
      ad.insert(ad.end(), g.begin(), g.end());
    }

    const auto base = p.flatten();
    auto loss = [&](const std::vector<double>& theta) {
      NetworkParams q = p;
      q.assign_flat(theta);
      const Tensor y = unet_eval(q, x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * c[i];
      return s;
    };
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t i = static_cast<std::size_t>(rng.unit() * static_cast<double>(base.size()));
      auto plus = base, minus = base;
      plus[i] += 1e-5;
      minus[i] -= 1e-5;
      const double fd = (loss(plus) - loss(minus)) / 2e-5;
      CHECK(oracle::rel_err(ad[i], fd, 1e-6) <= 1e-4);
    }
  }
}
