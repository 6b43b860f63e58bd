#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nld/tensor.hpp"

namespace nld {

struct UNetConfig {
  int depth = 4;        // resolution scales; depth-1 downsamplings
  int filters = 128;    // channels of every conv except the final one
  int kernel = 3;
  double slope = 0.1;   // leaky-ReLU slope
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Ordered parameter set. Layer order and names are a pure function of the
// config; see build_unet for the layout.
struct NetworkParams {
  UNetConfig config;
  std::vector<NamedTensor> tensors;

  std::size_t count() const;  // total scalar entries
  const Tensor& get(const std::string& name) const;

  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);
};

NetworkParams build_unet(const UNetConfig& cfg);

struct UNetOutput {
  Var output;               // [2,H,W]
  std::vector<Var> params;  // leaves, same order as NetworkParams::tensors
};

// Records the forward pass on `tape`. x0 must be [2,H,W] with H and W
// divisible by 2^(depth-1).
UNetOutput unet_forward(const NetworkParams& params, const Tensor& x0, Tape& tape);

// Convenience: forward pass only, returns the output value.
Tensor unet_eval(const NetworkParams& params, const Tensor& x0);

// Sum of squares over every parameter entry.
double param_l2(const NetworkParams& params);

}  // namespace nld
