#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "nld/array_file.hpp"
#include "nld/error.hpp"
#include "nld/runner.hpp"
#include "nld/simulate.hpp"
#include "oracles.hpp"

using namespace nld;

namespace {

struct Problem {
  MultiCoilKSpace d;
  CoilSensitivities s;
  SamplingMask p;
};

Problem small_problem(std::uint64_t seed = 1) {
  const ComplexImage x = shepp_logan(16, 16, 1.0, seed);
  const CoilSensitivities s = simulate_coils(4, 16, 16, seed + 1);
  const SamplingMask p = sample_pattern(PatternKind::uniform1d, 16, 16, 2, 1, 4);
  return {simulate_acquisition(x, s, p, 0.0, seed + 2).undersampled, s, p};
}

ReconConfig small_config() {
  ReconConfig c;
  c.unet.depth = 2;
  c.unet.filters = 4;
  c.iterations = 20;
  c.lr = 0.01;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("total_loss") {
    NetworkParams p;
    p.tensors.push_back({"w", Tensor({2}, {0.0, 2.0})});  // ||theta||^2 = 4
    CHECK(total_loss(1.0, p, 0.0) == 1.0);
    CHECK(total_loss(1.0, p, 0.5) == 3.0);
    CHECK_THROWS_AS(total_loss(1.0, p, -1.0), Error);
  }

  TEST_CASE("config validation") {
    ReconConfig c = small_config();
    c.iterations = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = small_config();
    c.lambda = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = small_config();
    CHECK(c.effective_lambda() == 0.0);
    c.regularized = true;
    CHECK(c.effective_lambda() == c.lambda);
  }

  TEST_CASE("regularization does not change the first data term") {
    const Problem pr = small_problem();
    ReconConfig a = small_config();
    a.iterations = 3;
    ReconConfig b = a;
    b.regularized = true;
    b.lambda = 0.5;
    const ReconResult ra = reconstruct(pr.d, pr.s, pr.p, a);
    const ReconResult rb = reconstruct(pr.d, pr.s, pr.p, b);
    CHECK(ra.loss_history[0].data == rb.loss_history[0].data);
    CHECK(rb.loss_history[0].total == rb.loss_history[0].data + 0.5 * rb.loss_history[0].reg);
    CHECK(ra.loss_history[1].data != rb.loss_history[1].data);
  }

  TEST_CASE("two runs are bitwise identical") {
    const Problem pr = small_problem();
    const ReconResult a = reconstruct(pr.d, pr.s, pr.p, small_config());
    const ReconResult b = reconstruct(pr.d, pr.s, pr.p, small_config());
    REQUIRE(a.loss_history.size() == b.loss_history.size());
    for (std::size_t i = 0; i < a.loss_history.size(); ++i) {
      CHECK(a.loss_history[i].data == b.loss_history[i].data);
      CHECK(a.loss_history[i].total == b.loss_history[i].total);
    }
    CHECK(a.image == b.image);
  }

  TEST_CASE("seed selects the initialization") {
    const Problem pr = small_problem();
    ReconConfig c = small_config();
    c.iterations = 1;
    const double first = reconstruct(pr.d, pr.s, pr.p, c).loss_history[0].data;
    c.seed = 6;
    CHECK(reconstruct(pr.d, pr.s, pr.p, c).loss_history[0].data != first);
  }

  TEST_CASE("stored data term matches an independent re-evaluation") {
    const Problem pr = small_problem();
    const ReconResult r = reconstruct(pr.d, pr.s, pr.p, small_config());
    CHECK(r.iterations_run == 20);
    const double again = evaluate_data_term(r.params, pr.d, pr.s, pr.p);
    CHECK(oracle::rel_err(again, r.loss_history.back().data, 0.0) <= 1e-10);
  }

  TEST_CASE("returned image is the de-normalized network output") {
    const Problem pr = small_problem();
    const ReconResult r = reconstruct(pr.d, pr.s, pr.p, small_config());
    const ZeroFill zf = zero_fill(pr.d, pr.s, pr.p);
    CHECK(r.scale == zf.scale);
    const Tensor out = unet_eval(r.params, to_channels(zf.image));
    const ComplexImage expect = from_channels(out);
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(r.image.data[i] == expect.data[i] * r.scale);
  }

  TEST_CASE("observer can stop early") {
    const Problem pr = small_problem();
    int calls = 0;
    const ReconResult r = reconstruct(pr.d, pr.s, pr.p, small_config(), [&](int it, const LossRecord&) {
      ++calls;
      return it < 4;
    });
    CHECK(calls == 5);
    CHECK(r.iterations_run == 5);
    CHECK(r.loss_history.size() == 5);
  }

  TEST_CASE("checkpoints are written as flat parameter arrays") {
    const auto dir = std::filesystem::temp_directory_path() / "nld_runner_ckpt";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const Problem pr = small_problem();
    ReconConfig c = small_config();
    c.iterations = 6;
    c.checkpoint_every = 2;
    c.checkpoint_dir = dir.string();
    const ReconResult r = reconstruct(pr.d, pr.s, pr.p, c);
    CHECK(std::filesystem::exists(dir / "params_000002.nldt"));
    CHECK(std::filesystem::exists(dir / "params_000004.nldt"));
    const Array a = read_array((dir / "params_000004.nldt").string());
    CHECK(a.shape == std::vector<std::uint64_t>{r.params.count()});
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("fully sampled single-coil fit converges") {
    const ComplexImage x = shepp_logan(64, 64, 1.0, 3);
    CoilSensitivities s(1, 64, 64);
    for (auto& v : s.maps) v = 1.0;
    const SamplingMask p = oracle::full_mask(64, 64);
    const MultiCoilKSpace d = forward_op(x, s, p);

    ReconConfig c;
    c.unet.depth = 3;
    c.unet.filters = 8;
    c.iterations = 500;
    c.lr = 0.005;
    c.seed = 1;
    const ReconResult r = reconstruct(d, s, p, c);
    CHECK(r.loss_history.back().data <= 1e-3 * r.loss_history.front().data);

    // windowed decrease: min over [k, k+100] never increases with k
    const auto& h = r.loss_history;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 100 < h.size(); ++k) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t j = k; j <= k + 100; ++j) m = std::min(m, h[j].total);
      CHECK(m <= prev);
      prev = m;
    }
  }
}
