#include "nld/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nld/error.hpp"
#include "nld/random.hpp"

namespace nld {

namespace {

constexpr double kCoilRingRadius = 1.2;
constexpr double kCoilWidth = 0.9;
constexpr double kMaxPhaseSlope = std::numbers::pi / 2;

std::size_t lattice_offset(std::size_t n, int r) {
  return (n / 2) % static_cast<std::size_t>(r);
}

}  // namespace

void PhantomSpec::validate() const {
  if (h < 16 || w < 16) fail(ErrorCode::invalid_argument, "phantom: h and w must be >= 16");
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::invalid_argument, "phantom: noise_sigma < 0");
}

const std::array<Ellipse, 10>& shepp_logan_ellipses() {
  static const std::array<Ellipse, 10> ellipses{{
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
      {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
      {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
      {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
      {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  }};
  return ellipses;
}

double pixel_coordinate(std::size_t i, std::size_t n) {
  return (2.0 * static_cast<double>(i) + 1.0 - static_cast<double>(n)) / static_cast<double>(n);
}

ComplexImage shepp_logan(std::size_t h, std::size_t w, double phase_strength,
                         std::uint64_t seed) {
  PhantomSpec{h, w, phase_strength, 0.0, seed}.validate();
  Rng rng(seed);
  std::array<double, 6> c{};
  for (auto& v : c) v = rng.uniform(-1.0, 1.0);

  std::vector<double> mag(h * w, 0.0);
  for (std::size_t row = 0; row < h; ++row) {
    const double y = -pixel_coordinate(row, h);
    for (std::size_t col = 0; col < w; ++col) {
      const double x = pixel_coordinate(col, w);
      double v = 0.0;
      for (const auto& e : shepp_logan_ellipses()) {
        const double t = e.theta_deg * std::numbers::pi / 180.0;
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = dx * std::cos(t) + dy * std::sin(t);
        const double q = -dx * std::sin(t) + dy * std::cos(t);
        if ((u * u) / (e.a * e.a) + (q * q) / (e.b * e.b) <= 1.0) v += e.intensity;
      }
      mag[row * w + col] = std::max(v, 0.0);
    }
  }
  const double peak = *std::max_element(mag.begin(), mag.end());
  if (!(peak > 0.0)) fail(ErrorCode::invalid_argument, "shepp_logan: grid too coarse");

  ComplexImage img(h, w);
  for (std::size_t row = 0; row < h; ++row) {
    const double y = -pixel_coordinate(row, h);
    for (std::size_t col = 0; col < w; ++col) {
      const double x = pixel_coordinate(col, w);
      const double poly = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
      img.at(row, col) = std::polar(mag[row * w + col] / peak, phase_strength * poly);
    }
  }
  return img;
}

CoilSensitivities simulate_coils(std::size_t coils, std::size_t h, std::size_t w,
                                 std::uint64_t seed) {
  if (coils == 0) fail(ErrorCode::invalid_argument, "simulate_coils: need at least one coil");
  Rng rng(seed);
  const double rotation = rng.uniform(0.0, 2.0 * std::numbers::pi);
  struct Profile {
    double cx, cy, slope_x, slope_y, phase0;
  };
  std::vector<Profile> profiles(coils);
  for (std::size_t l = 0; l < coils; ++l) {
    const double angle = rotation + 2.0 * std::numbers::pi * static_cast<double>(l) /
                                        static_cast<double>(coils);
    profiles[l] = {kCoilRingRadius * std::cos(angle), kCoilRingRadius * std::sin(angle),
                   rng.uniform(-kMaxPhaseSlope, kMaxPhaseSlope),
                   rng.uniform(-kMaxPhaseSlope, kMaxPhaseSlope),
                   rng.uniform(-std::numbers::pi, std::numbers::pi)};
  }

  CoilSensitivities s(coils, h, w);
  for (std::size_t row = 0; row < h; ++row) {
    const double y = -pixel_coordinate(row, h);
    for (std::size_t col = 0; col < w; ++col) {
      const double x = pixel_coordinate(col, w);
      double sos = 0.0;
      for (std::size_t l = 0; l < coils; ++l) {
        const auto& p = profiles[l];
        const double r2 = (x - p.cx) * (x - p.cx) + (y - p.cy) * (y - p.cy);
        const double amp = std::exp(-r2 / (2.0 * kCoilWidth * kCoilWidth));
        const cdouble v = std::polar(amp, p.phase0 + p.slope_x * x + p.slope_y * y);
        s.at(l, row, col) = v;
        sos += std::norm(v);
      }
      const double inv = 1.0 / std::sqrt(sos);
      for (std::size_t l = 0; l < coils; ++l) s.at(l, row, col) *= inv;
    }
  }
  return s;
}

PatternKind parse_pattern_kind(const std::string& text) {
  if (text == "uniform1d") return PatternKind::uniform1d;
  if (text == "uniform2d") return PatternKind::uniform2d;
  fail(ErrorCode::invalid_argument, "unknown sampling pattern '" + text + "'");
}

std::string to_string(PatternKind kind) {
  return kind == PatternKind::uniform1d ? "uniform1d" : "uniform2d";
}

SamplingMask sample_pattern(PatternKind kind, std::size_t h, std::size_t w, int r_rows,
                            int r_cols, std::size_t acs) {
  if (h == 0 || w == 0) fail(ErrorCode::invalid_argument, "sample_pattern: empty grid");
  if (r_rows < 1 || (kind == PatternKind::uniform2d && r_cols < 1)) {
    fail(ErrorCode::invalid_argument, "sample_pattern: acceleration must be >= 1");
  }
  if (acs > h || (kind == PatternKind::uniform2d && acs > w)) {
    fail(ErrorCode::invalid_argument, "sample_pattern: ACS does not fit the grid");
  }
  SamplingMask mask(h, w);
  const std::size_t ry = static_cast<std::size_t>(r_rows);
  const std::size_t rx = kind == PatternKind::uniform2d ? static_cast<std::size_t>(r_cols) : 1;
  const std::size_t oy = lattice_offset(h, r_rows);
  const std::size_t ox = kind == PatternKind::uniform2d ? lattice_offset(w, r_cols) : 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (y % ry == oy && x % rx == ox) mask.values[y * w + x] = 1;

  if (acs > 0) {
    mask.acs.y0 = h / 2 - acs / 2;
    mask.acs.h = acs;
    if (kind == PatternKind::uniform1d) {
      mask.acs.x0 = 0;
      mask.acs.w = w;
    } else {
      mask.acs.x0 = w / 2 - acs / 2;
      mask.acs.w = acs;
    }
    for (std::size_t y = mask.acs.y0; y < mask.acs.y0 + mask.acs.h; ++y)
      for (std::size_t x = mask.acs.x0; x < mask.acs.x0 + mask.acs.w; ++x) mask.values[y * w + x] = 1;
  }
  mask.validate();
  return mask;
}

Acquisition simulate_acquisition(const ComplexImage& x, const CoilSensitivities& maps,
                                 const SamplingMask& mask, double noise_sigma,
                                 std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::invalid_argument, "noise_sigma must be >= 0");
  SamplingMask full(x.h, x.w);
  std::fill(full.values.begin(), full.values.end(), 1);
  Acquisition acq;
  acq.full = forward_op(x, maps, full);
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    const double component = noise_sigma / std::sqrt(2.0);
    for (auto& v : acq.full.data) {
      const double re = rng.normal();
      const double im = rng.normal();
      v += cdouble{component * re, component * im};
    }
  }
  if (mask.h != x.h || mask.w != x.w) {
    fail(ErrorCode::shape_mismatch, "simulate_acquisition: mask extents differ from image");
  }
  acq.undersampled = acq.full;
  const std::size_t n = x.h * x.w;
  for (std::size_t l = 0; l < acq.undersampled.coils; ++l) {
    auto c = acq.undersampled.coil(l);
    for (std::size_t i = 0; i < n; ++i)
      if (!mask.values[i]) c[i] = 0.0;
  }
  return acq;
}

}  // namespace nld
