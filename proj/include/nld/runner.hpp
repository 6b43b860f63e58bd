#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nld/mri_operator.hpp"
#include "nld/optim.hpp"
#include "nld/unet.hpp"

namespace nld {

struct ReconConfig {
  UNetConfig unet;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int iterations = 2000;
  // false: data-consistency loss only. true: adds lambda * ||theta||^2.
  bool regularized = false;
  double lambda = 1e-6;
  // Seeds the network initialization; overrides unet.seed.
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 = off
  std::string checkpoint_dir = ".";
  // Stop once the total loss changed by less than 1e-7 (relative) over the
  // last 200 iterations.
  bool plateau_stop = false;

  void validate() const;
  double effective_lambda() const { return regularized ? lambda : 0.0; }

  friend bool operator==(const ReconConfig&, const ReconConfig&) = default;
};

struct LossRecord {
  double data = 0.0;
  double reg = 0.0;    // ||theta||^2 at the evaluated parameters
  double total = 0.0;  // data + lambda * reg
};

struct ReconResult {
  ComplexImage image;        // network output times the zero-fill scale
  ComplexImage zero_filled;  // adjoint image, not normalized
  double scale = 1.0;
  std::vector<LossRecord> loss_history;
  int iterations_run = 0;
  double lambda = 0.0;       // effective lambda used for `total`
  NetworkParams params;      // parameters that produced `image`
};

double total_loss(double data_term, const NetworkParams& params, double lambda);

// Called after every recorded iteration; return false to stop early.
using ReconObserver = std::function<bool(int iteration, const LossRecord&)>;

ReconResult reconstruct(const MultiCoilKSpace& d_u, const CoilSensitivities& maps,
                        const SamplingMask& mask, const ReconConfig& cfg,
                        const ReconObserver& observer = {});

// Data term at given parameters, evaluated from scratch on the normalized
// problem (d_u / scale).
double evaluate_data_term(const NetworkParams& params, const MultiCoilKSpace& d_u,
                          const CoilSensitivities& maps, const SamplingMask& mask);

}  // namespace nld
