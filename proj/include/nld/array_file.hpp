#pragma once

// "NLDT" array container.
//
//   offset  size       field
//   0       4          magic "NLDT"
//   4       1          version (1)
//   5       1          dtype: 0 real32, 1 real64, 2 complex64, 3 complex128
//   6       1          ndim
//   7       1          padding (0)
//   8       8*ndim     extents, u64 little-endian
//   ...                payload, row-major little-endian; complex values are
//                      interleaved (re, im)

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nld/mri_operator.hpp"

namespace nld {

enum class DType : std::uint8_t { real32 = 0, real64 = 1, complex64 = 2, complex128 = 3 };

std::size_t dtype_size(DType dtype);

struct Array {
  using Storage = std::variant<std::vector<float>, std::vector<double>,
                               std::vector<std::complex<float>>,
                               std::vector<std::complex<double>>>;

  std::vector<std::uint64_t> shape;
  Storage data;

  DType dtype() const { return static_cast<DType>(data.index()); }
  std::size_t size() const;

  static Array real32(std::vector<std::uint64_t> shape, std::vector<float> values);
  static Array real64(std::vector<std::uint64_t> shape, std::vector<double> values);
  static Array complex64(std::vector<std::uint64_t> shape, std::vector<std::complex<float>> values);
  static Array complex128(std::vector<std::uint64_t> shape,
                          std::vector<std::complex<double>> values);

  // Widening accessors; any stored dtype converts to these.
  std::vector<double> as_real() const;
  std::vector<std::complex<double>> as_complex() const;

  friend bool operator==(const Array&, const Array&) = default;
};

std::string encode_array(const Array& array);
Array decode_array(std::string_view bytes);

void write_array(const std::string& path, const Array& array);
Array read_array(const std::string& path);

// Domain conversions. Images and k-space are stored complex128, masks real32.
Array to_array(const ComplexImage& img);
Array to_array(const MultiCoilKSpace& k);
Array to_array(const CoilSensitivities& maps);
Array to_array(const SamplingMask& mask);
Array magnitude_array(const std::vector<double>& magnitude, std::size_t h, std::size_t w);

ComplexImage image_from_array(const Array& a);
MultiCoilKSpace kspace_from_array(const Array& a);
// Support is every pixel where some coil is nonzero.
CoilSensitivities maps_from_array(const Array& a);
// The ACS rectangle is recovered with infer_acs.
SamplingMask mask_from_array(const Array& a);

// Largest fully sampled rectangle grown outward from the grid centre.
AcsRect infer_acs(const SamplingMask& mask);

}  // namespace nld
