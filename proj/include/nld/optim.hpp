#pragma once

#include <cstdint>
#include <vector>

#include "nld/tensor.hpp"
#include "nld/unet.hpp"

namespace nld {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const NetworkParams& params);
};

// One bias-corrected ADAM update, in place. grads[i] pairs with
// params.tensors[i]. Non-finite gradients abort before anything is touched.
void adam_step(NetworkParams& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamOptions& opts);

}  // namespace nld
