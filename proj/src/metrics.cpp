#include "nld/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "nld/error.hpp"

namespace nld {

namespace {

void check_pair(std::span<const double> ref, std::span<const double> test) {
  if (ref.size() != test.size()) {
    fail(ErrorCode::shape_mismatch, "metrics: images differ in size (" +
                                        std::to_string(ref.size()) + " vs " +
                                        std::to_string(test.size()) + ")");
  }
  if (ref.empty()) fail(ErrorCode::invalid_argument, "metrics: empty image");
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size * size));
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double r2 = (y - c) * (y - c) + (x - c) * (x - c);
      const double v = std::exp(-r2 / (2.0 * sigma * sigma));
      g[static_cast<std::size_t>(y * size + x)] = v;
      total += v;
    }
  for (auto& v : g) v /= total;
  return g;
}

}  // namespace

std::vector<double> magnitude(const ComplexImage& img) {
  std::vector<double> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = std::abs(img.data[i]);
  return out;
}

double nrmse(std::span<const double> ref, std::span<const double> test) {
  check_pair(ref, test);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = test[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  if (!(den > 0.0)) fail(ErrorCode::invalid_argument, "nrmse: reference image is zero");
  return std::sqrt(num / den);
}

double psnr(std::span<const double> ref, std::span<const double> test) {
  check_pair(ref, test);
  double mse = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = test[i] - ref[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ref.size());
  if (mse == 0.0) return kPsnrCap;
  const double peak = *std::max_element(ref.begin(), ref.end());
  return std::min(kPsnrCap, 20.0 * std::log10(peak / std::sqrt(mse)));
}

double ssim(std::span<const double> ref, std::span<const double> test, std::size_t h,
            std::size_t w, const SsimOptions& opts) {
  check_pair(ref, test);
  if (ref.size() != h * w) fail(ErrorCode::shape_mismatch, "ssim: size != h*w");
  const auto win = static_cast<std::size_t>(opts.window);
  if (opts.window < 1 || win > h || win > w) {
    fail(ErrorCode::invalid_argument, "ssim: image smaller than the window");
  }

  std::vector<double> a(ref.begin(), ref.end()), b(test.begin(), test.end());
  double range = 0.0;
  if (opts.normalize_by_ref) {
    const double peak = *std::max_element(a.begin(), a.end());
    if (!(peak > 0.0)) fail(ErrorCode::invalid_argument, "ssim: reference maximum is not positive");
    for (auto& v : a) v /= peak;
    for (auto& v : b) v /= peak;
    const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
    range = opts.data_range.value_or(*hi - *lo);
  } else {
    if (!opts.data_range) fail(ErrorCode::invalid_argument, "ssim: data_range required");
    range = *opts.data_range;
  }
  const double c1 = (opts.k1 * range) * (opts.k1 * range);
  const double c2 = (opts.k2 * range) * (opts.k2 * range);

  const auto g = gaussian_window(opts.window, opts.sigma);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + win <= h; ++y0) {
    for (std::size_t x0 = 0; x0 + win <= w; ++x0) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t dy = 0; dy < win; ++dy)
        for (std::size_t dx = 0; dx < win; ++dx) {
          const double wt = g[dy * win + dx];
          const std::size_t i = (y0 + dy) * w + x0 + dx;
          ma += wt * a[i];
          mb += wt * b[i];
        }
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (std::size_t dy = 0; dy < win; ++dy)
        for (std::size_t dx = 0; dx < win; ++dx) {
          const double wt = g[dy * win + dx];
          const std::size_t i = (y0 + dy) * w + x0 + dx;
          va += wt * (a[i] - ma) * (a[i] - ma);
          vb += wt * (b[i] - mb) * (b[i] - mb);
          cov += wt * (a[i] - ma) * (b[i] - mb);
        }
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

MetricReport evaluate(std::span<const double> ref, std::span<const double> test, std::size_t h,
                      std::size_t w) {
  MetricReport r;
  r.nrmse = nrmse(ref, test);
  r.psnr_db = psnr(ref, test);
  r.psnr_capped = r.psnr_db == kPsnrCap;
  r.ssim = ssim(ref, test, h, w);
  return r;
}

}  // namespace nld
