#include "nld/mri_operator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "nld/error.hpp"

namespace nld {

namespace {

// FFTW planning is not thread-safe; execution of a finished plan is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t h, std::size_t w, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(h, w, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    fftw_complex* buf = fftw_alloc_complex(h * w);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// out[(y + sy) % h, (x + sx) % w] = in[y, x]
void circshift(std::span<const cdouble> in, std::span<cdouble> out, std::size_t h,
               std::size_t w, std::size_t sy, std::size_t sx) {
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t ty = (y + sy) % h;
    for (std::size_t x = 0; x < w; ++x) out[ty * w + (x + sx) % w] = in[y * w + x];
  }
}

void centered_dft(std::span<cdouble> plane, std::size_t h, std::size_t w, int sign) {
  if (plane.size() != h * w) {
    fail(ErrorCode::shape_mismatch, "fft2c: plane size does not match extents");
  }
  if (h == 0 || w == 0) return;
  std::vector<cdouble> tmp(h * w);
  // ifftshift moves the centre index floor(n/2) to 0.
  circshift(plane, tmp, h, w, h - h / 2, w - w / 2);
  auto* p = reinterpret_cast<fftw_complex*>(tmp.data());
  fftw_execute_dft(plan_cache().get(h, w, sign), p, p);
  circshift(tmp, plane, h, w, h / 2, w / 2);
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (auto& v : plane) v *= norm;
}

void check_maps(const CoilSensitivities& maps, std::size_t h, std::size_t w, const char* op) {
  if (maps.h != h || maps.w != w || maps.coils == 0 ||
      maps.maps.size() != maps.coils * h * w) {
    fail(ErrorCode::shape_mismatch, std::string(op) + ": coil maps do not match image extents");
  }
}

void check_mask(const SamplingMask& mask, std::size_t h, std::size_t w, const char* op) {
  if (mask.h != h || mask.w != w || mask.values.size() != h * w) {
    fail(ErrorCode::shape_mismatch, std::string(op) + ": mask does not match image extents");
  }
}

}  // namespace

std::size_t SamplingMask::count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

double SamplingMask::acceleration() const {
  const std::size_t n = count();
  return n == 0 ? 0.0 : static_cast<double>(h * w) / static_cast<double>(n);
}

void SamplingMask::validate() const {
  if (values.size() != h * w) fail(ErrorCode::shape_mismatch, "mask: value count != h*w");
  for (auto v : values) {
    if (v > 1) fail(ErrorCode::invalid_argument, "mask: values must be 0 or 1");
  }
  if (count() == 0) fail(ErrorCode::invalid_argument, "mask: no sampled location");
  if (acs.empty()) return;
  if (acs.y0 + acs.h > h || acs.x0 + acs.w > w) {
    fail(ErrorCode::invalid_argument, "mask: ACS rectangle outside the grid");
  }
  for (std::size_t y = acs.y0; y < acs.y0 + acs.h; ++y)
    for (std::size_t x = acs.x0; x < acs.x0 + acs.w; ++x)
      if (!sampled(y, x)) fail(ErrorCode::invalid_argument, "mask: ACS location not sampled");
}

void fft2c_inplace(std::span<cdouble> plane, std::size_t h, std::size_t w) {
  centered_dft(plane, h, w, FFTW_FORWARD);
}

void ifft2c_inplace(std::span<cdouble> plane, std::size_t h, std::size_t w) {
  centered_dft(plane, h, w, FFTW_BACKWARD);
}

ComplexImage fft2c(const ComplexImage& img) {
  ComplexImage out = img;
  fft2c_inplace(out.data, out.h, out.w);
  return out;
}

ComplexImage ifft2c(const ComplexImage& kspace) {
  ComplexImage out = kspace;
  ifft2c_inplace(out.data, out.h, out.w);
  return out;
}

MultiCoilKSpace forward_op(const ComplexImage& x, const CoilSensitivities& maps,
                           const SamplingMask& mask) {
  check_maps(maps, x.h, x.w, "forward_op");
  check_mask(mask, x.h, x.w, "forward_op");
  const std::size_t n = x.h * x.w;
  MultiCoilKSpace out(maps.coils, x.h, x.w);
  for (std::size_t l = 0; l < maps.coils; ++l) {
    auto dst = out.coil(l);
    auto s = maps.coil(l);
    for (std::size_t i = 0; i < n; ++i) dst[i] = s[i] * x.data[i];
    fft2c_inplace(dst, x.h, x.w);
    for (std::size_t i = 0; i < n; ++i)
      if (!mask.values[i]) dst[i] = 0.0;
  }
  return out;
}

ComplexImage adjoint_op(const MultiCoilKSpace& d, const CoilSensitivities& maps,
                        const SamplingMask& mask) {
  check_maps(maps, d.h, d.w, "adjoint_op");
  check_mask(mask, d.h, d.w, "adjoint_op");
  if (d.coils != maps.coils) {
    fail(ErrorCode::shape_mismatch, "adjoint_op: k-space has " + std::to_string(d.coils) +
                                        " coils, maps have " + std::to_string(maps.coils));
  }
  const std::size_t n = d.h * d.w;
  ComplexImage out(d.h, d.w);
  std::vector<cdouble> tmp(n);
  for (std::size_t l = 0; l < d.coils; ++l) {
    auto src = d.coil(l);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = mask.values[i] ? src[i] : cdouble{};
    ifft2c_inplace(tmp, d.h, d.w);
    auto s = maps.coil(l);
    for (std::size_t i = 0; i < n; ++i) out.data[i] += std::conj(s[i]) * tmp[i];
  }
  return out;
}

ZeroFill zero_fill(const MultiCoilKSpace& d_u, const CoilSensitivities& maps,
                   const SamplingMask& mask) {
  ZeroFill zf;
  zf.image = adjoint_op(d_u, maps, mask);
  double peak = 0.0;
  for (const auto& v : zf.image.data) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) fail(ErrorCode::empty_acquisition, "empty acquisition");
  if (!std::isfinite(peak)) fail(ErrorCode::non_finite, "zero_fill: non-finite data");
  zf.scale = peak;
  for (auto& v : zf.image.data) v /= peak;
  return zf;
}

DataLoss data_loss(const ComplexImage& x, const MultiCoilKSpace& d_u,
                   const CoilSensitivities& maps, const SamplingMask& mask) {
  if (d_u.h != x.h || d_u.w != x.w) {
    fail(ErrorCode::shape_mismatch, "data_loss: k-space extents differ from the image");
  }
  MultiCoilKSpace residual = forward_op(x, maps, mask);
  if (residual.coils != d_u.coils) {
    fail(ErrorCode::shape_mismatch, "data_loss: coil count mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < residual.data.size(); ++i) {
    residual.data[i] -= d_u.data[i];
    loss += std::norm(residual.data[i]);
  }
  const ComplexImage back = adjoint_op(residual, maps, mask);
  DataLoss out;
  out.loss = loss;
  out.grad = Tensor({2, x.h, x.w});
  const std::size_t n = x.h * x.w;
  for (std::size_t i = 0; i < n; ++i) {
    out.grad[i] = 2.0 * back.data[i].real();
    out.grad[n + i] = 2.0 * back.data[i].imag();
  }
  if (!std::isfinite(loss) || !out.grad.all_finite()) {
    fail(ErrorCode::non_finite, "data_loss: non-finite loss or gradient");
  }
  return out;
}

Tensor to_channels(const ComplexImage& img) {
  Tensor t({2, img.h, img.w});
  const std::size_t n = img.h * img.w;
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = img.data[i].real();
    t[n + i] = img.data[i].imag();
  }
  return t;
}

ComplexImage from_channels(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 2) {
    fail(ErrorCode::shape_mismatch, "from_channels: expected [2,H,W], got " +
                                        shape_string(t.shape()));
  }
  ComplexImage img(t.dim(1), t.dim(2));
  const std::size_t n = img.h * img.w;
  for (std::size_t i = 0; i < n; ++i) img.data[i] = {t[i], t[n + i]};
  return img;
}

}  // namespace nld
