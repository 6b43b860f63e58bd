#include "nld/optim.hpp"

#include <cmath>

#include "nld/error.hpp"

namespace nld {

AdamState AdamState::zeros_like(const NetworkParams& params) {
  AdamState s;
  for (const auto& t : params.tensors) {
    s.m.emplace_back(t.value.shape());
    s.v.emplace_back(t.value.shape());
  }
  return s;
}

void adam_step(NetworkParams& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamOptions& opts) {
  const std::size_t n = params.tensors.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    fail(ErrorCode::shape_mismatch, "adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Shape& shape = params.tensors[i].value.shape();
    if (grads[i].shape() != shape || state.m[i].shape() != shape || state.v[i].shape() != shape) {
      fail(ErrorCode::shape_mismatch, "adam_step: shape mismatch for " + params.tensors[i].name);
    }
    if (!grads[i].all_finite()) {
      fail(ErrorCode::non_finite, "adam_step: non-finite gradient for " + params.tensors[i].name +
                                      " at step " + std::to_string(state.t + 1));
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(opts.beta1, t);
  const double bc2 = 1.0 - std::pow(opts.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = params.tensors[i].value.data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = opts.beta1 * m[j] + (1.0 - opts.beta1) * g[j];
      v[j] = opts.beta2 * v[j] + (1.0 - opts.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
  }
}

}  // namespace nld
