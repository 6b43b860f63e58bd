#include "nld/unet.hpp"

#include <cmath>

#include "nld/error.hpp"
#include "nld/random.hpp"

namespace nld {

namespace {

constexpr std::size_t kImageChannels = 2;

struct LayerSpec {
  std::string name;
  std::size_t in;
  std::size_t out;
  int kernel;
};

// Layer plan, in parameter order:
//   enc{s}_a, enc{s}_b     two convs per scale s = 0..depth-1
//   down{s}                stride-2 conv from scale s to s+1 (s < depth-1)
//   up{s}                  conv after nearest x2 upsampling into scale s
//   dec{s}_a, dec{s}_b     convs after concatenating the encoder skip at s
//   final                  1x1 conv to two channels, no activation
std::vector<LayerSpec> layer_plan(const UNetConfig& cfg) {
  const auto f = static_cast<std::size_t>(cfg.filters);
  const int k = cfg.kernel;
  std::vector<LayerSpec> plan;
  for (int s = 0; s < cfg.depth; ++s) {
    const std::string tag = std::to_string(s);
    plan.push_back({"enc" + tag + "_a", s == 0 ? kImageChannels : f, f, k});
    plan.push_back({"enc" + tag + "_b", f, f, k});
    if (s + 1 < cfg.depth) plan.push_back({"down" + tag, f, f, k});
  }
  for (int s = cfg.depth - 2; s >= 0; --s) {
    const std::string tag = std::to_string(s);
    plan.push_back({"up" + tag, f, f, k});
    plan.push_back({"dec" + tag + "_a", 2 * f, f, k});
    plan.push_back({"dec" + tag + "_b", f, f, k});
  }
  plan.push_back({"final", f, kImageChannels, 1});
  return plan;
}

}  // namespace

void UNetConfig::validate() const {
  if (depth < 2) fail(ErrorCode::invalid_argument, "unet: depth must be >= 2");
  if (filters < 1) fail(ErrorCode::invalid_argument, "unet: filters must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) fail(ErrorCode::invalid_argument, "unet: kernel must be odd");
  if (!(slope >= 0.0 && slope < 1.0)) {
    fail(ErrorCode::invalid_argument, "unet: slope must lie in [0,1)");
  }
}

std::size_t NetworkParams::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.value.size();
  return n;
}

const Tensor& NetworkParams::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  fail(ErrorCode::invalid_argument, "no parameter named " + name);
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(count());
  for (const auto& t : tensors) flat.insert(flat.end(), t.value.values().begin(), t.value.values().end());
  return flat;
}

void NetworkParams::assign_flat(std::span<const double> flat) {
  if (flat.size() != count()) {
    fail(ErrorCode::shape_mismatch, "assign_flat: expected " + std::to_string(count()) +
                                        " values, got " + std::to_string(flat.size()));
  }
  std::size_t off = 0;
  for (auto& t : tensors) {
    auto dst = t.value.data();
    std::copy(flat.begin() + static_cast<long>(off),
              flat.begin() + static_cast<long>(off + dst.size()), dst.begin());
    off += dst.size();
  }
}

NetworkParams build_unet(const UNetConfig& cfg) {
  cfg.validate();
  NetworkParams params;
  params.config = cfg;
  Rng rng(cfg.seed);
  for (const auto& layer : layer_plan(cfg)) {
    const auto k = static_cast<std::size_t>(layer.kernel);
    const double fan_in = static_cast<double>(layer.in * k * k);
    const double bound = 1.0 / std::sqrt(fan_in);
    Tensor w({layer.out, layer.in, k, k});
    for (auto& v : w.data()) v = rng.uniform(-bound, bound);
    params.tensors.push_back({layer.name + ".weight", std::move(w)});
    params.tensors.push_back({layer.name + ".bias", Tensor({layer.out})});
  }
  return params;
}

UNetOutput unet_forward(const NetworkParams& params, const Tensor& x0, Tape& tape) {
  const UNetConfig& cfg = params.config;
  cfg.validate();
  if (x0.rank() != 3 || x0.dim(0) != kImageChannels) {
    fail(ErrorCode::shape_mismatch, "unet_forward: input must be [2,H,W], got " +
                                        shape_string(x0.shape()));
  }
  const std::size_t stride = std::size_t{1} << (cfg.depth - 1);
  if (x0.dim(1) % stride != 0 || x0.dim(2) % stride != 0) {
    fail(ErrorCode::shape_mismatch, "unet_forward: spatial extents " + shape_string(x0.shape()) +
                                        " not divisible by " + std::to_string(stride));
  }
  if (!x0.all_finite()) fail(ErrorCode::non_finite, "unet_forward: non-finite input");

  UNetOutput out;
  out.params.reserve(params.tensors.size());
  for (const auto& t : params.tensors) out.params.push_back(tape.leaf(t.value));

  std::size_t next = 0;
  const int same = (cfg.kernel - 1) / 2;
  auto conv = [&](Var x, int stride_, int pad) {
    const Var w = out.params[next++];
    const Var b = out.params[next++];
    return conv2d(tape, x, w, b, stride_, pad);
  };
  auto conv_act = [&](Var x, int stride_) {
    return leaky_relu(tape, conv(x, stride_, same), cfg.slope);
  };

  std::vector<Var> skips;
  Var h = tape.constant(x0);
  for (int s = 0; s < cfg.depth; ++s) {
    h = conv_act(h, 1);
    h = conv_act(h, 1);
    if (s + 1 < cfg.depth) {
      skips.push_back(h);
      h = conv_act(h, 2);
    }
  }
  for (int s = cfg.depth - 2; s >= 0; --s) {
    h = conv_act(upsample_nearest(tape, h, 2), 1);
    h = concat_channels(tape, h, skips[static_cast<std::size_t>(s)]);
    h = conv_act(h, 1);
    h = conv_act(h, 1);
  }
  out.output = conv(h, 1, 0);
  if (!tape.value(out.output).all_finite()) {
    fail(ErrorCode::non_finite, "unet_forward: non-finite output");
  }
  return out;
}

Tensor unet_eval(const NetworkParams& params, const Tensor& x0) {
  Tape tape;
  const UNetOutput out = unet_forward(params, x0, tape);
  return tape.value(out.output);
}

double param_l2(const NetworkParams& params) {
  double s = 0.0;
  for (const auto& t : params.tensors)
    for (double v : t.value.data()) s += v * v;
  return s;
}

}  // namespace nld
