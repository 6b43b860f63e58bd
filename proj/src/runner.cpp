#include "nld/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "nld/array_file.hpp"
#include "nld/error.hpp"

namespace nld {

namespace {

constexpr int kPlateauWindow = 200;
constexpr double kPlateauTol = 1e-7;

MultiCoilKSpace normalized(const MultiCoilKSpace& d, double scale) {
  MultiCoilKSpace out = d;
  for (auto& v : out.data) v /= scale;
  return out;
}

void write_checkpoint(const NetworkParams& params, const ReconConfig& cfg, int iteration) {
  char name[64];
  std::snprintf(name, sizeof name, "params_%06d.nldt", iteration);
  const auto path = std::filesystem::path(cfg.checkpoint_dir) / name;
  write_array(path.string(), Array::real64({params.count()}, params.flatten()));
}

}  // namespace

void ReconConfig::validate() const {
  unet.validate();
  if (iterations < 1) fail(ErrorCode::invalid_argument, "recon: iterations must be >= 1");
  if (!(lr > 0.0)) fail(ErrorCode::invalid_argument, "recon: lr must be > 0");
  if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "recon: lambda must be >= 0");
  if (checkpoint_every < 0) fail(ErrorCode::invalid_argument, "recon: checkpoint_every < 0");
}

double total_loss(double data_term, const NetworkParams& params, double lambda) {
  if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "total_loss: lambda must be >= 0");
  if (lambda == 0.0) return data_term;
  return data_term + lambda * param_l2(params);
}

double evaluate_data_term(const NetworkParams& params, const MultiCoilKSpace& d_u,
                          const CoilSensitivities& maps, const SamplingMask& mask) {
  const ZeroFill zf = zero_fill(d_u, maps, mask);
  const Tensor out = unet_eval(params, to_channels(zf.image));
  return data_loss(from_channels(out), normalized(d_u, zf.scale), maps, mask).loss;
}

ReconResult reconstruct(const MultiCoilKSpace& d_u, const CoilSensitivities& maps,
                        const SamplingMask& mask, const ReconConfig& cfg,
                        const ReconObserver& observer) {
  cfg.validate();
  const ZeroFill zf = zero_fill(d_u, maps, mask);
  const MultiCoilKSpace target = normalized(d_u, zf.scale);
  const Tensor x0 = to_channels(zf.image);

  UNetConfig ucfg = cfg.unet;
  ucfg.seed = cfg.seed;
  NetworkParams params = build_unet(ucfg);
  AdamState state = AdamState::zeros_like(params);
  const AdamOptions adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps};
  const double lambda = cfg.effective_lambda();

  ReconResult result;
  result.scale = zf.scale;
  result.lambda = lambda;
  result.zero_filled = zf.image;
  for (auto& v : result.zero_filled.data) v *= zf.scale;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int it = 0; it < cfg.iterations; ++it) {
    Tape tape;
    const UNetOutput net = unet_forward(params, x0, tape);
    ComplexImage x = from_channels(tape.value(net.output));
    const DataLoss dl = data_loss(x, target, maps, mask);

    LossRecord rec;
    rec.data = dl.loss;
    rec.reg = param_l2(params);
    rec.total = lambda == 0.0 ? rec.data : rec.data + lambda * rec.reg;
    if (!std::isfinite(rec.total)) {
      fail(ErrorCode::non_finite, "recon: non-finite loss at iteration " + std::to_string(it));
    }
    result.loss_history.push_back(rec);
    result.iterations_run = it + 1;
    result.image = std::move(x);

    bool stop = it + 1 == cfg.iterations;
    if (observer && !observer(it, rec)) stop = true;
    if (cfg.plateau_stop && it >= kPlateauWindow) {
      const double before = result.loss_history[static_cast<std::size_t>(it - kPlateauWindow)].total;
      if (std::abs(rec.total - before) <= kPlateauTol * std::abs(before)) stop = true;
    }
    if (stop) break;

    tape.backward(dot_const(tape, net.output, dl.grad));
    std::vector<Tensor> grads;
    grads.reserve(net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      Tensor g = tape.grad(net.params[i]);
      if (lambda > 0.0) {
        const auto p = params.tensors[i].value.data();
        auto gd = g.data();
        for (std::size_t j = 0; j < gd.size(); ++j) gd[j] += lambda * 2.0 * p[j];
      }
      grads.push_back(std::move(g));
    }
    adam_step(params, grads, state, adam);

    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
      write_checkpoint(params, cfg, it + 1);
    }
  }

  for (auto& v : result.image.data) v *= zf.scale;
  result.params = std::move(params);
  // The loop leaves `params` at the values that produced the last output
  // since no update follows the final evaluation.
  return result;
}

}  // namespace nld
