#include "nld/calibration.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include "nld/error.hpp"

namespace nld {

namespace {

using CMat = Eigen::MatrixXcd;

struct EspiritOperator {
  std::size_t coils = 0;
  std::vector<double> eigenvalue;    // per pixel
  std::vector<cdouble> eigenvector;  // [pixel, coil]
};

// Builds the calibration matrix from every k x k ACS patch (all coils), keeps
// the dominant right singular vectors, maps each kernel to image space and
// eigendecomposes the resulting L x L operator at each pixel.
EspiritOperator espirit_operator(const AcsBlock& acs, std::size_t h, std::size_t w,
                                 const EspiritOptions& opts) {
  const auto& d = acs.data;
  const std::size_t coils = d.coils;
  if (opts.kernel < 1) fail(ErrorCode::invalid_argument, "espirit: kernel must be >= 1");
  const auto k = static_cast<std::size_t>(opts.kernel);
  if (coils == 0 || k > d.h || k > d.w) {
    fail(ErrorCode::invalid_argument, "espirit: kernel " + std::to_string(k) +
                                          " larger than ACS block " + std::to_string(d.h) + "x" +
                                          std::to_string(d.w));
  }
  if (!(opts.sv_thresh > 0.0 && opts.sv_thresh < 1.0) ||
      !(opts.eig_thresh > 0.0 && opts.eig_thresh < 1.0)) {
    fail(ErrorCode::invalid_argument, "espirit: thresholds must lie in (0,1)");
  }
  if (h < k || w < k) fail(ErrorCode::invalid_argument, "espirit: output grid smaller than kernel");

  const std::size_t py = d.h - k + 1, px = d.w - k + 1;
  const std::size_t cols = coils * k * k;
  CMat calib(static_cast<long>(py * px), static_cast<long>(cols));
  for (std::size_t y = 0; y < py; ++y)
    for (std::size_t x = 0; x < px; ++x) {
      const auto row = static_cast<long>(y * px + x);
      for (std::size_t l = 0; l < coils; ++l)
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx)
            calib(row, static_cast<long>((l * k + dy) * k + dx)) = d.at(l, y + dy, x + dx);
    }

  Eigen::BDCSVD<CMat> svd(calib, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0)) {
    fail(ErrorCode::degenerate_calibration, "espirit: calibration matrix has rank 0");
  }
  long keep = 0;
  while (keep < sv.size() && sv(keep) >= opts.sv_thresh * sv(0)) ++keep;

  // Patch vectors span the conjugates of the right singular vectors. Each
  // kept kernel becomes, per coil, sqrt(HW) * ifft2c(zero-padded kernel).
  const std::size_t n = h * w;
  const double gain = std::sqrt(static_cast<double>(n));
  std::vector<cdouble> g(static_cast<std::size_t>(keep) * coils * n);
  const std::size_t oy = h / 2 - k / 2, ox = w / 2 - k / 2;
  for (long j = 0; j < keep; ++j) {
    for (std::size_t l = 0; l < coils; ++l) {
      std::span<cdouble> plane(g.data() + (static_cast<std::size_t>(j) * coils + l) * n, n);
      for (std::size_t dy = 0; dy < k; ++dy)
        for (std::size_t dx = 0; dx < k; ++dx)
          plane[(oy + dy) * w + ox + dx] =
              std::conj(svd.matrixV()(static_cast<long>((l * k + dy) * k + dx), j));
      ifft2c_inplace(plane, h, w);
      for (auto& v : plane) v *= gain;
    }
  }

  EspiritOperator op;
  op.coils = coils;
  op.eigenvalue.resize(n);
  op.eigenvector.resize(n * coils);
  const double inv_patch = 1.0 / static_cast<double>(k * k);
  CMat m(static_cast<long>(coils), static_cast<long>(coils));
  Eigen::VectorXcd gv(static_cast<long>(coils));
  Eigen::SelfAdjointEigenSolver<CMat> eig;
  for (std::size_t p = 0; p < n; ++p) {
    m.setZero();
    for (long j = 0; j < keep; ++j) {
      for (std::size_t l = 0; l < coils; ++l)
        gv(static_cast<long>(l)) = g[(static_cast<std::size_t>(j) * coils + l) * n + p];
      m.noalias() += gv * gv.adjoint();
    }
    m *= inv_patch;
    eig.compute(m);
    const long lead = static_cast<long>(coils) - 1;  // eigenvalues ascend
    op.eigenvalue[p] = eig.eigenvalues()(lead);
    for (std::size_t l = 0; l < coils; ++l)
      op.eigenvector[p * coils + l] = eig.eigenvectors()(static_cast<long>(l), lead);
  }
  return op;
}

}  // namespace

AcsBlock extract_acs(const MultiCoilKSpace& d, const SamplingMask& mask) {
  if (mask.h != d.h || mask.w != d.w) {
    fail(ErrorCode::shape_mismatch, "extract_acs: mask extents differ from k-space");
  }
  const AcsRect& r = mask.acs;
  if (r.empty()) fail(ErrorCode::invalid_argument, "extract_acs: empty ACS region");
  if (r.y0 + r.h > d.h || r.x0 + r.w > d.w) {
    fail(ErrorCode::invalid_argument, "extract_acs: ACS region outside the grid");
  }
  AcsBlock block;
  block.y0 = r.y0;
  block.x0 = r.x0;
  block.data = MultiCoilKSpace(d.coils, r.h, r.w);
  for (std::size_t l = 0; l < d.coils; ++l)
    for (std::size_t y = 0; y < r.h; ++y)
      for (std::size_t x = 0; x < r.w; ++x) block.data.at(l, y, x) = d.at(l, r.y0 + y, r.x0 + x);
  return block;
}

std::vector<double> espirit_eigenvalues(const AcsBlock& acs, std::size_t h, std::size_t w,
                                        const EspiritOptions& opts) {
  return espirit_operator(acs, h, w, opts).eigenvalue;
}

CoilSensitivities espirit_maps(const AcsBlock& acs, std::size_t h, std::size_t w,
                               const EspiritOptions& opts) {
  const EspiritOperator op = espirit_operator(acs, h, w, opts);
  const std::size_t coils = op.coils;
  const std::size_t n = h * w;
  CoilSensitivities s(coils, h, w);
  for (std::size_t p = 0; p < n; ++p) {
    if (op.eigenvalue[p] < opts.eig_thresh) {
      s.support[p] = 0;
      continue;
    }
    s.support[p] = 1;
    const cdouble ref = op.eigenvector[p * coils];
    const cdouble rot = std::abs(ref) > 0.0 ? std::conj(ref) / std::abs(ref) : cdouble{1.0};
    double norm2 = 0.0;
    for (std::size_t l = 0; l < coils; ++l) norm2 += std::norm(op.eigenvector[p * coils + l]);
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t l = 0; l < coils; ++l) {
      cdouble v = op.eigenvector[p * coils + l] * rot * inv;
      if (l == 0) v = {std::abs(v), 0.0};
      s.maps[l * n + p] = v;
    }
  }
  return s;
}

std::vector<int> GrappaKernel::source_offsets() const {
  std::vector<int> off(static_cast<std::size_t>(geometry.source_lines));
  const int first = -(geometry.source_lines / 2 - 1);
  for (int j = 0; j < geometry.source_lines; ++j) off[static_cast<std::size_t>(j)] = (first + j) * r;
  return off;
}

GrappaFit grappa_fit(const AcsBlock& acs, int r, const GrappaGeometry& geom, double ridge) {
  if (r < 1) fail(ErrorCode::invalid_argument, "grappa: acceleration must be >= 1");
  if (r == 1) fail(ErrorCode::nothing_to_calibrate, "nothing to calibrate: R=1 has no missing lines");
  if (geom.source_lines < 2 || geom.source_lines % 2 != 0) {
    fail(ErrorCode::invalid_argument, "grappa: source_lines must be even and >= 2");
  }
  if (geom.readout_taps < 1 || geom.readout_taps % 2 == 0) {
    fail(ErrorCode::invalid_argument, "grappa: readout_taps must be odd");
  }
  if (!(ridge >= 0.0)) fail(ErrorCode::invalid_argument, "grappa: ridge must be >= 0");

  const auto& d = acs.data;
  GrappaFit fit;
  GrappaKernel& kern = fit.kernel;
  kern.r = r;
  kern.geometry = geom;
  kern.ridge = ridge;
  kern.coils = d.coils;
  const auto offsets = kern.source_offsets();
  const int lo = offsets.front(), hi = offsets.back();
  const int half = geom.readout_taps / 2;
  const std::size_t nsrc = kern.sources();

  const long ah = static_cast<long>(d.h), aw = static_cast<long>(d.w);
  const long y_first = -lo, y_last = ah - 1 - hi;  // y0 range keeping sources inside
  const long x_first = half, x_last = aw - 1 - half;
  const long ny = y_last - y_first + 1, nx = x_last - x_first + 1;
  const std::size_t equations = ny > 0 && nx > 0 ? static_cast<std::size_t>(ny * nx) : 0;
  fit.equations = equations;
  fit.unknowns = nsrc;
  if (equations < nsrc) {
    fail(ErrorCode::underdetermined,
         "grappa: underdetermined calibration, " + std::to_string(equations) +
             " equations for " + std::to_string(nsrc) + " unknowns per target coil");
  }

  CMat a(static_cast<long>(equations), static_cast<long>(nsrc));
  for (long y0 = y_first; y0 <= y_last; ++y0)
    for (long x = x_first; x <= x_last; ++x) {
      const long row = (y0 - y_first) * nx + (x - x_first);
      for (std::size_t l = 0; l < d.coils; ++l)
        for (std::size_t j = 0; j < offsets.size(); ++j)
          for (int t = 0; t < geom.readout_taps; ++t) {
            const auto col = static_cast<long>((l * offsets.size() + j) * geom.readout_taps + t);
            a(row, col) = d.at(l, static_cast<std::size_t>(y0 + offsets[j]),
                               static_cast<std::size_t>(x + t - half));
          }
    }

  Eigen::CompleteOrthogonalDecomposition<CMat> cod;
  Eigen::LDLT<CMat> normal;
  if (ridge == 0.0) {
    cod.compute(a);
  } else {
    CMat aha = a.adjoint() * a;
    const double lambda = ridge * aha.trace().real();
    aha.diagonal().array() += lambda;
    normal.compute(aha);
  }

  for (int m = 1; m < r; ++m) {
    CMat b(static_cast<long>(equations), static_cast<long>(d.coils));
    for (long y0 = y_first; y0 <= y_last; ++y0)
      for (long x = x_first; x <= x_last; ++x) {
        const long row = (y0 - y_first) * nx + (x - x_first);
        for (std::size_t l = 0; l < d.coils; ++l)
          b(row, static_cast<long>(l)) =
              d.at(l, static_cast<std::size_t>(y0 + m), static_cast<std::size_t>(x));
      }
    const CMat wts = ridge == 0.0 ? CMat(cod.solve(b)) : CMat(normal.solve(a.adjoint() * b));
    const double bnorm = b.norm();
    fit.residuals.push_back(bnorm > 0.0 ? (a * wts - b).norm() / bnorm : 0.0);

    std::vector<cdouble> flat(d.coils * nsrc);
    for (std::size_t l = 0; l < d.coils; ++l)
      for (std::size_t s = 0; s < nsrc; ++s)
        flat[l * nsrc + s] = wts(static_cast<long>(s), static_cast<long>(l));
    kern.weights.push_back(std::move(flat));
  }
  return fit;
}

GrappaKernel grappa_calibrate(const AcsBlock& acs, int r, const GrappaGeometry& geom,
                              double ridge) {
  return grappa_fit(acs, r, geom, ridge).kernel;
}

MultiCoilKSpace grappa_apply(const MultiCoilKSpace& d_u, const GrappaKernel& kernel,
                             const SamplingMask& mask) {
  if (mask.h != d_u.h || mask.w != d_u.w) {
    fail(ErrorCode::shape_mismatch, "grappa_apply: mask extents differ from k-space");
  }
  if (kernel.coils != d_u.coils) {
    fail(ErrorCode::geometry_mismatch, "grappa_apply: kernel calibrated for " +
                                           std::to_string(kernel.coils) + " coils, data has " +
                                           std::to_string(d_u.coils));
  }
  const std::size_t h = d_u.h, w = d_u.w;
  const auto r = static_cast<std::size_t>(kernel.r);
  if (kernel.weights.size() + 1 != r) {
    fail(ErrorCode::geometry_mismatch, "grappa_apply: kernel has no weight set per offset");
  }
  // Sources wrap around the phase-encode edge; the lattice only stays regular
  // across the wrap when R divides H.
  if (h % r != 0) {
    fail(ErrorCode::geometry_mismatch, "grappa_apply: " + std::to_string(h) +
                                           " phase-encode rows are not a multiple of R=" +
                                           std::to_string(r));
  }

  // Rows are either fully acquired or fully missing.
  std::vector<bool> acquired(h);
  for (std::size_t y = 0; y < h; ++y) {
    std::size_t n = 0;
    for (std::size_t x = 0; x < w; ++x) n += mask.sampled(y, x) ? 1 : 0;
    if (n != 0 && n != w) {
      fail(ErrorCode::geometry_mismatch, "grappa_apply: row " + std::to_string(y) +
                                             " is partially sampled; only 1-D patterns are supported");
    }
    acquired[y] = n == w;
  }
  std::size_t phase = r;
  for (std::size_t o = 0; o < r && phase == r; ++o) {
    bool ok = true;
    for (std::size_t y = o; y < h; y += r) ok = ok && acquired[y];
    if (ok) phase = o;
  }
  if (phase == r) {
    fail(ErrorCode::geometry_mismatch,
         "grappa_apply: mask has no fully sampled lattice with spacing " + std::to_string(r));
  }

  MultiCoilKSpace out = d_u;
  const auto offsets = kernel.source_offsets();
  const int taps = kernel.geometry.readout_taps;
  const int half = taps / 2;
  const std::size_t nsrc = kernel.sources();
  std::vector<cdouble> src(nsrc);
  auto wrap = [](long i, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
  };
  for (std::size_t y = 0; y < h; ++y) {
    if (acquired[y]) continue;
    const std::size_t m = (y + r - phase) % r;
    const long y0 = static_cast<long>(y) - static_cast<long>(m);
    const auto& wts = kernel.weights[m - 1];
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t l = 0; l < d_u.coils; ++l)
        for (std::size_t j = 0; j < offsets.size(); ++j) {
          const std::size_t sy = wrap(y0 + offsets[j], h);
          for (int t = 0; t < taps; ++t)
            src[(l * offsets.size() + j) * static_cast<std::size_t>(taps) + static_cast<std::size_t>(t)] =
                d_u.at(l, sy, wrap(static_cast<long>(x) + t - half, w));
        }
      for (std::size_t l = 0; l < d_u.coils; ++l) {
        cdouble acc{};
        const cdouble* row = wts.data() + l * nsrc;
        for (std::size_t s = 0; s < nsrc; ++s) acc += row[s] * src[s];
        out.at(l, y, x) = acc;
      }
    }
  }
  return out;
}

std::vector<double> rsos_combine(const MultiCoilKSpace& coil_images) {
  const std::size_t n = coil_images.h * coil_images.w;
  std::vector<double> out(n, 0.0);
  for (std::size_t l = 0; l < coil_images.coils; ++l) {
    auto c = coil_images.coil(l);
    for (std::size_t i = 0; i < n; ++i) out[i] += std::norm(c[i]);
  }
  for (auto& v : out) v = std::sqrt(v);
  return out;
}

std::vector<double> rsos_image(const MultiCoilKSpace& kspace) {
  MultiCoilKSpace imgs = kspace;
  for (std::size_t l = 0; l < imgs.coils; ++l) ifft2c_inplace(imgs.coil(l), imgs.h, imgs.w);
  return rsos_combine(imgs);
}

}  // namespace nld
