#pragma once

// Cartesian multi-coil acquisition model E = P F S, its adjoint, the
// zero-filled input image and the data-consistency loss.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nld/tensor.hpp"

namespace nld {

using cdouble = std::complex<double>;

struct ComplexImage {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<cdouble> data;

  ComplexImage() = default;
  ComplexImage(std::size_t h_, std::size_t w_) : h(h_), w(w_), data(h_ * w_) {}

  cdouble& at(std::size_t y, std::size_t x) { return data[y * w + x]; }
  cdouble at(std::size_t y, std::size_t x) const { return data[y * w + x]; }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const ComplexImage&, const ComplexImage&) = default;
};

// Coil-major complex array [coils, h, w].
struct MultiCoilKSpace {
  std::size_t coils = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<cdouble> data;

  MultiCoilKSpace() = default;
  MultiCoilKSpace(std::size_t l, std::size_t h_, std::size_t w_)
      : coils(l), h(h_), w(w_), data(l * h_ * w_) {}

  std::span<cdouble> coil(std::size_t l) { return {data.data() + l * h * w, h * w}; }
  std::span<const cdouble> coil(std::size_t l) const {
    return {data.data() + l * h * w, h * w};
  }
  cdouble& at(std::size_t l, std::size_t y, std::size_t x) { return data[(l * h + y) * w + x]; }
  cdouble at(std::size_t l, std::size_t y, std::size_t x) const {
    return data[(l * h + y) * w + x];
  }

  friend bool operator==(const MultiCoilKSpace&, const MultiCoilKSpace&) = default;
};

// Centre-anchored, fully sampled calibration rectangle.
struct AcsRect {
  std::size_t y0 = 0;
  std::size_t x0 = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  bool empty() const { return h == 0 || w == 0; }
  bool contains(std::size_t y, std::size_t x) const {
    return y >= y0 && y < y0 + h && x >= x0 && x < x0 + w;
  }
  friend bool operator==(const AcsRect&, const AcsRect&) = default;
};

struct SamplingMask {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<std::uint8_t> values;
  AcsRect acs;

  SamplingMask() = default;
  SamplingMask(std::size_t h_, std::size_t w_) : h(h_), w(w_), values(h_ * w_, 0) {}

  bool sampled(std::size_t y, std::size_t x) const { return values[y * w + x] != 0; }
  std::size_t count() const;
  double acceleration() const;
  // Throws unless values are binary, the ACS block is inside and fully
  // sampled, and at least one location is sampled.
  void validate() const;

  friend bool operator==(const SamplingMask&, const SamplingMask&) = default;
};

struct CoilSensitivities {
  std::size_t coils = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<cdouble> maps;
  std::vector<std::uint8_t> support;

  CoilSensitivities() = default;
  CoilSensitivities(std::size_t l, std::size_t h_, std::size_t w_)
      : coils(l), h(h_), w(w_), maps(l * h_ * w_), support(h_ * w_, 1) {}

  std::span<const cdouble> coil(std::size_t l) const {
    return {maps.data() + l * h * w, h * w};
  }
  cdouble& at(std::size_t l, std::size_t y, std::size_t x) { return maps[(l * h + y) * w + x]; }
  cdouble at(std::size_t l, std::size_t y, std::size_t x) const {
    return maps[(l * h + y) * w + x];
  }
};

// Centered orthonormal 2-D DFT on a row-major h x w plane, in place.
void fft2c_inplace(std::span<cdouble> plane, std::size_t h, std::size_t w);
void ifft2c_inplace(std::span<cdouble> plane, std::size_t h, std::size_t w);

ComplexImage fft2c(const ComplexImage& img);
ComplexImage ifft2c(const ComplexImage& kspace);

MultiCoilKSpace forward_op(const ComplexImage& x, const CoilSensitivities& maps,
                           const SamplingMask& mask);
ComplexImage adjoint_op(const MultiCoilKSpace& d, const CoilSensitivities& maps,
                        const SamplingMask& mask);

struct ZeroFill {
  ComplexImage image;  // normalized so max |image| == 1
  double scale = 1.0;  // multiply by this to undo the normalization
};

ZeroFill zero_fill(const MultiCoilKSpace& d_u, const CoilSensitivities& maps,
                   const SamplingMask& mask);

struct DataLoss {
  double loss = 0.0;
  // d loss / d (real, imag) as a [2,H,W] tensor (channel 0 real).
  Tensor grad;
};

DataLoss data_loss(const ComplexImage& x, const MultiCoilKSpace& d_u,
                   const CoilSensitivities& maps, const SamplingMask& mask);

// Two-channel convention: channel 0 = real part, channel 1 = imaginary part.
Tensor to_channels(const ComplexImage& img);
ComplexImage from_channels(const Tensor& t);

}  // namespace nld
