#pragma once

// Calibration from the fully sampled centre of k-space: ESPIRiT-style coil
// sensitivity estimation and a 1-D GRAPPA baseline.

#include <vector>

#include "nld/mri_operator.hpp"

namespace nld {

struct AcsBlock {
  MultiCoilKSpace data;  // [coils, ah, aw]
  std::size_t y0 = 0;
  std::size_t x0 = 0;
};

AcsBlock extract_acs(const MultiCoilKSpace& d, const SamplingMask& mask);

struct EspiritOptions {
  int kernel = 6;
  double sv_thresh = 0.01;
  double eig_thresh = 0.9;
};

// Per-pixel leading eigenvector of the calibration-derived image-space
// operator. Pixels whose leading eigenvalue falls below eig_thresh are
// outside the support and get zero maps. Coil 0 is made real non-negative.
CoilSensitivities espirit_maps(const AcsBlock& acs, std::size_t h, std::size_t w,
                               const EspiritOptions& opts = {});

// Leading eigenvalue of the same per-pixel operator, for diagnostics.
std::vector<double> espirit_eigenvalues(const AcsBlock& acs, std::size_t h, std::size_t w,
                                        const EspiritOptions& opts = {});

struct GrappaGeometry {
  int source_lines = 4;   // sampled phase-encode lines per fit
  int readout_taps = 5;   // odd
  friend bool operator==(const GrappaGeometry&, const GrappaGeometry&) = default;
};

// For every offset m = 1..R-1 between a missing line and the sampled line
// above it, a [coils x sources] weight matrix (row-major). Source index is
// (coil * source_lines + line) * readout_taps + tap.
struct GrappaKernel {
  int r = 2;
  GrappaGeometry geometry;
  double ridge = 0.0;
  std::size_t coils = 0;
  std::vector<std::vector<cdouble>> weights;

  std::size_t sources() const {
    return coils * static_cast<std::size_t>(geometry.source_lines * geometry.readout_taps);
  }
  // Line offsets of the sources relative to the sampled line above the target.
  std::vector<int> source_offsets() const;
};

struct GrappaFit {
  GrappaKernel kernel;
  // Relative residual ||A W - B|| / ||B|| on the calibration equations, per
  // offset class.
  std::vector<double> residuals;
  std::size_t equations = 0;
  std::size_t unknowns = 0;
};

GrappaFit grappa_fit(const AcsBlock& acs, int r, const GrappaGeometry& geom, double ridge);
GrappaKernel grappa_calibrate(const AcsBlock& acs, int r, const GrappaGeometry& geom = {},
                              double ridge = 1e-6);

// Synthesizes the missing phase-encode lines of a uniform 1-D pattern.
// Acquired samples are copied through unchanged; neighbours beyond the grid
// wrap around.
MultiCoilKSpace grappa_apply(const MultiCoilKSpace& d_u, const GrappaKernel& kernel,
                             const SamplingMask& mask);

// sqrt(sum_l |img_l|^2) per pixel.
std::vector<double> rsos_combine(const MultiCoilKSpace& coil_images);

// Per-coil inverse FFT followed by rsos.
std::vector<double> rsos_image(const MultiCoilKSpace& kspace);

}  // namespace nld
