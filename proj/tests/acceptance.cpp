// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `nld_acceptance 1 2 9`.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "nld/array_file.hpp"
#include "nld/calibration.hpp"
#include "nld/metrics.hpp"
#include "nld/runner.hpp"
#include "nld/simulate.hpp"
#include "oracles.hpp"

using namespace nld;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

cdouble inner(const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
  cdouble s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double norm(const std::vector<cdouble>& a) { return std::sqrt(std::abs(inner(a, a))); }

Outcome adjoint_test() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const CoilSensitivities s = oracle::random_maps(8, 32, 32, rng);
    const SamplingMask p = oracle::random_mask(32, 32, rng, 0.4);
    const ComplexImage x = oracle::random_image(32, 32, rng);
    const MultiCoilKSpace y = oracle::random_kspace(8, 32, 32, rng);
    const MultiCoilKSpace ex = forward_op(x, s, p);
    const ComplexImage ehy = adjoint_op(y, s, p);
    const cdouble lhs = inner(ex.data, y.data), rhs = inner(x.data, ehy.data);
    worst = std::max(worst, std::abs(lhs - rhs) / (norm(ex.data) * norm(y.data)));
  }
  return {worst <= 1e-10, "max relative mismatch over 100 seeds " + fmt("%.3g", worst)};
}

Outcome fft_test() {
  Rng rng(7);
  double err = 0.0, unitarity = 0.0;
  for (std::size_t n : {4u, 5u}) {
    const ComplexImage x = oracle::random_image(n, n, rng);
    const ComplexImage k = fft2c(x);
    const ComplexImage ref = oracle::naive_dft2c(x, -1);
    for (std::size_t i = 0; i < k.size(); ++i) err = std::max(err, std::abs(k.data[i] - ref.data[i]));
    const double nx = norm(x.data), nk = norm(k.data);
    unitarity = std::max(unitarity, std::abs(nk * nk - nx * nx) / (nx * nx));
  }
  return {err <= 1e-10 && unitarity <= 1e-12,
          "max abs error " + fmt("%.3g", err) + ", unitarity " + fmt("%.3g", unitarity)};
}

// Signs of every leaky-ReLU input. Each activation node directly follows the
// conv node that feeds it.
std::vector<bool> activation_pattern(const NetworkParams& params, const Tensor& x0) {
  Tape tape;
  unet_forward(params, x0, tape);
  std::vector<bool> signs;
  for (std::size_t i = 1; i < tape.size(); ++i) {
    if (tape.kind(Var{i}) != OpKind::leaky_relu) continue;
    for (double v : tape.value(Var{i - 1}).data()) signs.push_back(v > 0.0);
  }
  return signs;
}

struct GradientInstance {
  NetworkParams params;
  CoilSensitivities s;
  SamplingMask p;
  MultiCoilKSpace d;
  Tensor x0;
};

GradientInstance gradient_instance(std::uint64_t seed) {
  Rng rng(seed);
  UNetConfig cfg;
  cfg.depth = 2;
  cfg.filters = 4;
  cfg.kernel = 3;
  cfg.seed = 11;
  GradientInstance g{build_unet(cfg), oracle::random_maps(2, 8, 8, rng), oracle::random_mask(8, 8, rng, 0.5),
                     oracle::random_kspace(2, 8, 8, rng), Tensor{}};
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t i = 0; i < 64; ++i)
      if (!g.p.values[i]) g.d.data[l * 64 + i] = 0.0;
  // Biases start at zero, so the net is positively homogeneous in its input.
  // Peak 100 instead of 1 lifts the deeper pre-activations (median ~1e-4 at
  // peak 1 under the fan-in init) well clear of a 1e-5 bias nudge.
  g.x0 = to_channels(zero_fill(g.d, g.s, g.p).image);
  for (double& v : g.x0.data()) v *= 100.0;
  return g;
}

// Central differences are only an oracle where the loss is smooth over the
// whole stencil, so the instance is drawn until no activation input changes
// sign at any of the 2N perturbed points. Every parameter is then compared.
Outcome gradient_test() {
  constexpr double h = 1e-5;
  std::uint64_t seed = 3;
  int skipped = 0;
  std::optional<GradientInstance> inst;
  for (; seed < 3 + 200 && !inst; ++seed) {
    GradientInstance g = gradient_instance(seed);
    const std::vector<bool> base = activation_pattern(g.params, g.x0);
    std::vector<double> theta = g.params.flatten();
    bool smooth = true;
    NetworkParams q = g.params;
    for (std::size_t i = 0; smooth && i < theta.size(); ++i) {
      const double keep = theta[i];
      for (double step : {h, -h}) {
        theta[i] = keep + step;
        q.assign_flat(theta);
        smooth = smooth && activation_pattern(q, g.x0) == base;
      }
      theta[i] = keep;
    }
    if (smooth) {
      inst = std::move(g);
    } else {
      ++skipped;
    }
  }
  if (!inst) return {false, "no instance with a kink-free stencil among 200 draws"};
  const GradientInstance& g = *inst;

  Tape tape;
  const UNetOutput net = unet_forward(g.params, g.x0, tape);
  const DataLoss dl = data_loss(from_channels(tape.value(net.output)), g.d, g.s, g.p);
  tape.backward(dot_const(tape, net.output, dl.grad));
  std::vector<double> ad;
  for (const Var v : net.params) {
    const auto gr = tape.grad(v).data();
    ad.insert(ad.end(), gr.begin(), gr.end());
  }

  auto loss = [&](std::span<const double> theta) {
    NetworkParams q = g.params;
    q.assign_flat(theta);
    return data_loss(from_channels(unet_eval(q, g.x0)), g.d, g.s, g.p).loss;
  };
  const auto fd = oracle::central_differences(loss, g.params.flatten(), h);
  const double floor = 1e-6 * oracle::max_abs(fd);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) worst = std::max(worst, oracle::rel_err(ad[i], fd[i], floor));
  return {worst <= 1e-4, std::to_string(fd.size()) + " parameters, max rel err " + fmt("%.3g", worst) +
                             " (instance seed " + std::to_string(seed - 1) + ", " + std::to_string(skipped) +
                             " draws skipped for kinks in the stencil)"};
}

struct Phantom {
  ComplexImage x;
  CoilSensitivities s;
  double kmax = 0.0;
};

Phantom acceptance_phantom() {
  Phantom ph{shepp_logan(64, 64, 1.0, 1), simulate_coils(8, 64, 64, 2), 0.0};
  const MultiCoilKSpace full = forward_op(ph.x, ph.s, oracle::full_mask(64, 64));
  for (auto v : full.data) ph.kmax = std::max(ph.kmax, std::abs(v));
  return ph;
}

Outcome equivalence_test() {
  const ComplexImage x = shepp_logan(32, 32, 1.0, 5);
  const CoilSensitivities s = simulate_coils(4, 32, 32, 6);
  const SamplingMask p = sample_pattern(PatternKind::uniform1d, 32, 32, 2, 1, 8);
  const MultiCoilKSpace d = simulate_acquisition(x, s, p, 1e-3, 7).undersampled;
  ReconConfig plain;
  plain.unet.depth = 3;
  plain.unet.filters = 8;
  plain.iterations = 100;
  plain.seed = 9;
  ReconConfig reg = plain;
  reg.regularized = true;
  reg.lambda = 0.0;
  const ReconResult a = reconstruct(d, s, p, plain);
  const ReconResult b = reconstruct(d, s, p, reg);
  bool same = a.loss_history.size() == b.loss_history.size();
  for (std::size_t i = 0; same && i < a.loss_history.size(); ++i) {
    same = a.loss_history[i].data == b.loss_history[i].data &&
           a.loss_history[i].total == b.loss_history[i].total &&
           a.loss_history[i].reg == b.loss_history[i].reg;
  }
  same = same && a.image == b.image;
  return {same, std::to_string(a.loss_history.size()) + " iterations, histories " +
                    (same ? "bitwise identical" : "differ")};
}

Outcome end_to_end_test() {
  const Phantom ph = acceptance_phantom();
  const SamplingMask p = sample_pattern(PatternKind::uniform1d, 64, 64, 4, 1, 16);
  const double sigma = 0.001 * ph.kmax;
  const MultiCoilKSpace d = simulate_acquisition(ph.x, ph.s, p, sigma, 3).undersampled;
  const CoilSensitivities maps = espirit_maps(extract_acs(d, p), 64, 64);

  ReconConfig cfg;
  cfg.unet.depth = 3;
  cfg.unet.filters = 32;
  cfg.iterations = 800;
  cfg.lr = 0.001;
  cfg.regularized = false;
  cfg.seed = 0;
  const ReconResult r = reconstruct(d, maps, p, cfg);

  const auto truth = magnitude(ph.x);
  const auto rec = magnitude(r.image), zf = magnitude(r.zero_filled);
  const double psnr_r = psnr(truth, rec), psnr_z = psnr(truth, zf);
  const double nrmse_r = nrmse(truth, rec), nrmse_z = nrmse(truth, zf);

  // windowed decrease of the loss (informational)
  bool windowed = true;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 100 < r.loss_history.size(); ++k) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = k; j <= k + 100; ++j) m = std::min(m, r.loss_history[j].total);
    windowed = windowed && m <= prev;
    prev = m;
  }
  return {psnr_r >= psnr_z + 5.0 && nrmse_r < 0.6 * nrmse_z,
          "PSNR " + fmt("%.2f", psnr_r) + " dB vs zero-fill " + fmt("%.2f", psnr_z) + " dB, NRMSE " +
              fmt("%.4f", nrmse_r) + " vs " + fmt("%.4f", nrmse_z) + ", windowed loss decrease " +
              (windowed ? "holds" : "violated")};
}

Outcome grappa_test() {
  const Phantom ph = acceptance_phantom();
  const SamplingMask p = sample_pattern(PatternKind::uniform1d, 64, 64, 2, 1, 16);
  const MultiCoilKSpace d = simulate_acquisition(ph.x, ph.s, p, 0.0, 4).undersampled;
  const MultiCoilKSpace filled = grappa_apply(d, grappa_calibrate(extract_acs(d, p), 2), p);
  bool preserved = true;
  for (std::size_t l = 0; l < 8; ++l)
    for (std::size_t i = 0; i < 4096; ++i)
      if (p.values[i]) preserved = preserved && filled.data[l * 4096 + i] == d.data[l * 4096 + i];
  const double e = nrmse(magnitude(ph.x), rsos_image(filled));
  return {e <= 0.15 && preserved, "rsos NRMSE " + fmt("%.4f", e) + ", acquired samples " +
                                      (preserved ? "preserved bitwise" : "modified")};
}

Outcome espirit_test() {
  const Phantom ph = acceptance_phantom();
  const SamplingMask p = sample_pattern(PatternKind::uniform1d, 64, 64, 4, 1, 16);
  const MultiCoilKSpace d = simulate_acquisition(ph.x, ph.s, p, 0.0, 5).undersampled;
  const CoilSensitivities est = espirit_maps(extract_acs(d, p), 64, 64);
  std::vector<double> corr;
  for (std::size_t px = 0; px < 4096; ++px) {
    if (!est.support[px]) continue;
    cdouble ip{};
    double ne = 0.0, nt = 0.0;
    for (std::size_t l = 0; l < 8; ++l) {
      const cdouble a = est.maps[l * 4096 + px], b = ph.s.maps[l * 4096 + px];
      ip += std::conj(a) * b;
      ne += std::norm(a);
      nt += std::norm(b);
    }
    corr.push_back(std::abs(ip) / std::sqrt(ne * nt));
  }
  if (corr.empty()) return {false, "empty support"};
  std::nth_element(corr.begin(), corr.begin() + corr.size() / 2, corr.end());
  const double median = corr[corr.size() / 2];
  return {median >= 0.99, "median correlation " + fmt("%.5f", median) + " over " +
                              std::to_string(corr.size()) + " support pixels"};
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"nldrecon"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism_test() {
  const fs::path dir = fs::temp_directory_path() / "nld_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto path = [&](const char* f) { return (dir / f).string(); };

  const ComplexImage x = shepp_logan(32, 32, 1.0, 8);
  const CoilSensitivities s = simulate_coils(4, 32, 32, 9);
  const SamplingMask p = sample_pattern(PatternKind::uniform1d, 32, 32, 2, 1, 8);
  MultiCoilKSpace d = simulate_acquisition(x, s, p, 1e-3, 10).undersampled;
  write_array(path("k.nldt"), to_array(d));
  for (auto& v : d.data) v *= 10.0;
  write_array(path("k10.nldt"), to_array(d));
  write_array(path("mask.nldt"), to_array(p));
  write_array(path("maps.nldt"), to_array(s));

  auto recon = [&](const char* k, const char* out) {
    return cli({"recon", "--kspace", path(k), "--mask", path("mask.nldt"), "--maps", path("maps.nldt"),
                "--out", path(out), "--depth", "3", "--filters", "8", "--iters", "200", "--seed", "4"});
  };
  if (recon("k.nldt", "a.nldt") || recon("k.nldt", "b.nldt") || recon("k10.nldt", "c.nldt")) {
    return {false, "recon command failed"};
  }
  const bool identical = slurp(dir / "a.nldt") == slurp(dir / "b.nldt");
  const auto a = read_array(path("a.nldt")).as_complex();
  const auto c = read_array(path("c.nldt")).as_complex();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(c[i] - 10.0 * a[i]);
    den += std::norm(10.0 * a[i]);
  }
  const double rel = std::sqrt(num / den);
  fs::remove_all(dir);
  return {identical && rel <= 1e-6, std::string("repeat runs ") + (identical ? "bitwise identical" : "differ") +
                                        ", scale-by-10 rel deviation " + fmt("%.3g", rel)};
}

Outcome file_format_test() {
  Rng rng(12);
  bool round_trip = true;
  const fs::path file = fs::temp_directory_path() / "nld_acceptance_array.nldt";
  const std::vector<Array> arrays = {
      Array::real32({3, 5}, std::vector<float>(15, 0.25f)),
      Array::real64({4, 2, 3}, oracle::random_tensor({24}, rng).values()),
      Array::complex64({7}, std::vector<std::complex<float>>(7, {1.5f, -0.5f})),
      to_array(oracle::random_kspace(3, 6, 5, rng))};
  for (const Array& a : arrays) {
    write_array(file.string(), a);
    const std::string bytes = slurp(file);
    const Array back = read_array(file.string());
    round_trip = round_trip && back == a && encode_array(back) == bytes;
  }
  fs::remove(file);

  const std::string header = encode_array(Array::real64({2, 1}, {1.0, -2.0}));
  const std::string oracle_bytes = std::string("NLDT\x01\x01\x02\x00", 8) +
                                   std::string("\x02\0\0\0\0\0\0\0\x01\0\0\0\0\0\0\0", 16) +
                                   std::string("\0\0\0\0\0\0\xf0\x3f\0\0\0\0\0\0\0\xc0", 16);
  const bool header_ok = header == oracle_bytes;
  return {round_trip && header_ok, std::string("round trip ") + (round_trip ? "bitwise" : "FAILED") +
                                       ", byte oracle " + (header_ok ? "matches" : "differs")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // runtime budget
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion criteria[] = {
      {1, "operator adjoint", 10.0, adjoint_test},
      {2, "fft2c vs naive DFT", 1.0, fft_test},
      {3, "end-to-end gradient vs finite differences", 60.0, gradient_test},
      {4, "regularized loss at lambda=0 equals data loss", 60.0, equivalence_test},
      {5, "end-to-end desk experiment R=4", 600.0, end_to_end_test},
      {6, "GRAPPA baseline R=2", 30.0, grappa_test},
      {7, "ESPIRiT map quality", 60.0, espirit_test},
      {8, "determinism and scaling", 600.0, determinism_test},
      {9, "array file format", 10.0, file_format_test},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("[%s] %d %s: %s; %.2f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
