#include <doctest.h>

#include <cmath>

#include "nld/error.hpp"
#include "nld/optim.hpp"

using namespace nld;

namespace {

// One-tensor "network" so adam_step can be driven directly.
NetworkParams single(std::vector<double> v) {
  NetworkParams p;
  const std::size_t n = v.size();
  p.tensors.push_back({"w", Tensor({n}, std::move(v))});
  return p;
}

}  // namespace

TEST_SUITE("optim") {
  TEST_CASE("zero gradient leaves parameters unchanged and advances t") {
    NetworkParams p = single({0.5, -1.5});
    AdamState s = AdamState::zeros_like(p);
    adam_step(p, {Tensor({2})}, s, {});
    CHECK(p.tensors[0].value == Tensor({2}, {0.5, -1.5}));
    CHECK(s.t == 1);
  }

  TEST_CASE("first step moves each coordinate by about lr against the gradient sign") {
    NetworkParams p = single({1.0, 1.0, 1.0});
    AdamState s = AdamState::zeros_like(p);
    AdamOptions o;
    o.lr = 0.01;
    adam_step(p, {Tensor({3}, {3.0, -0.2, 1e3})}, s, o);
    CHECK(p.tensors[0].value[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-8));
    CHECK(p.tensors[0].value[1] == doctest::Approx(1.0 + 0.01).epsilon(1e-8));
    CHECK(p.tensors[0].value[2] == doctest::Approx(1.0 - 0.01).epsilon(1e-8));
  }

  TEST_CASE("ten steps on w^2 match a hand-written reference loop") {
    NetworkParams p = single({1.0});
    AdamState s = AdamState::zeros_like(p);
    AdamOptions o;
    o.lr = 0.1;

    double w = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 10; ++t) {
      const double g = 2.0 * w;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);

      adam_step(p, {Tensor({1}, {2.0 * p.tensors[0].value[0]})}, s, o);
      CHECK(std::abs(p.tensors[0].value[0] - w) <= 1e-12);
    }
    CHECK(s.t == 10);
  }

  TEST_CASE("lr = 0 is a fixed point") {
    NetworkParams p = single({0.3, -0.7});
    AdamState s = AdamState::zeros_like(p);
    AdamOptions o;
    o.lr = 0.0;
    for (int i = 0; i < 5; ++i) adam_step(p, {Tensor({2}, {1.0, -4.0})}, s, o);
    CHECK(p.tensors[0].value == Tensor({2}, {0.3, -0.7}));
  }

  TEST_CASE("flipping gradient signs mirrors the update") {
    NetworkParams a = single({0.0, 0.0, 0.0}), b = single({0.0, 0.0, 0.0});
    AdamState sa = AdamState::zeros_like(a), sb = AdamState::zeros_like(b);
    const std::vector<double> g1 = {0.4, -1.2, 2.5}, g2 = {-0.1, 0.3, 0.9};
    const std::vector<double> sign = {1.0, -1.0, -1.0};
    for (const auto& g : {g1, g2, g1}) {
      std::vector<double> flipped(3);
      for (int i = 0; i < 3; ++i) flipped[i] = sign[i] * g[i];
      adam_step(a, {Tensor({3}, g)}, sa, {});
      adam_step(b, {Tensor({3}, flipped)}, sb, {});
    }
    for (int i = 0; i < 3; ++i) CHECK(b.tensors[0].value[i] == sign[i] * a.tensors[0].value[i]);
  }

  TEST_CASE("invalid gradients leave state untouched") {
    NetworkParams p = single({1.0, 2.0});
    AdamState s = AdamState::zeros_like(p);
    CHECK_THROWS_AS(adam_step(p, {Tensor({3})}, s, {}), Error);
    CHECK_THROWS_AS(adam_step(p, {Tensor({2}, {1.0, std::nan("")})}, s, {}), Error);
    CHECK_THROWS_AS(adam_step(p, {}, s, {}), Error);
    CHECK(s.t == 0);
    CHECK(p.tensors[0].value == Tensor({2}, {1.0, 2.0}));
  }
}
