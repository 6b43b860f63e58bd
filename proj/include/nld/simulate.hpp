#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "nld/mri_operator.hpp"

namespace nld {

struct PhantomSpec {
  std::size_t h = 64;
  std::size_t w = 64;
  double phase_strength = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Modified (high-contrast) Shepp-Logan ellipse, in normalized coordinates
// where the field of view spans [-1, 1] on both axes and y points up.
struct Ellipse {
  double intensity;
  double a;  // semi-axis along x
  double b;  // semi-axis along y
  double x0;
  double y0;
  double theta_deg;
};

const std::array<Ellipse, 10>& shepp_logan_ellipses();

// Normalized coordinate of pixel centre `i` on an axis of `n` pixels.
double pixel_coordinate(std::size_t i, std::size_t n);

// Magnitude in [0,1] with max exactly 1; phase = phase_strength times a
// seeded quadratic polynomial in the normalized coordinates.
ComplexImage shepp_logan(std::size_t h, std::size_t w, double phase_strength,
                         std::uint64_t seed);

// Gaussian receive profiles on a ring around the field of view with seeded
// linear phase ramps, normalized to unit sum of squares at every pixel.
CoilSensitivities simulate_coils(std::size_t coils, std::size_t h, std::size_t w,
                                 std::uint64_t seed);

enum class PatternKind { uniform1d, uniform2d };

PatternKind parse_pattern_kind(const std::string& text);
std::string to_string(PatternKind kind);

// uniform1d: every r_rows-th phase-encode row (the centre row is on the
// lattice) plus `acs` centred full rows. uniform2d: points on the
// r_rows x r_cols lattice plus a centred acs x acs square. r_cols is ignored
// for uniform1d.
SamplingMask sample_pattern(PatternKind kind, std::size_t h, std::size_t w, int r_rows,
                            int r_cols, std::size_t acs);

struct Acquisition {
  MultiCoilKSpace full;
  MultiCoilKSpace undersampled;
};

// d_full = fft2c(S_l x) + complex Gaussian noise with E|n|^2 = noise_sigma^2;
// d_u = P d_full.
Acquisition simulate_acquisition(const ComplexImage& x, const CoilSensitivities& maps,
                                 const SamplingMask& mask, double noise_sigma,
                                 std::uint64_t seed);

}  // namespace nld
