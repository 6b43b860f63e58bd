#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nld/mri_operator.hpp"

namespace nld {

// Reported when reference and test are identical (the true value is +inf).
inline constexpr double kPsnrCap = 300.0;

struct MetricReport {
  double psnr_db = 0.0;
  bool psnr_capped = false;
  double ssim = 0.0;
  double nrmse = 0.0;
};

struct SsimOptions {
  int window = 7;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  // Divide both images by max(ref) first. With this off the images are used
  // as given and `data_range` must be supplied, which makes SSIM symmetric.
  bool normalize_by_ref = true;
  std::optional<double> data_range;
};

std::vector<double> magnitude(const ComplexImage& img);

double nrmse(std::span<const double> ref, std::span<const double> test);
double psnr(std::span<const double> ref, std::span<const double> test);
double ssim(std::span<const double> ref, std::span<const double> test, std::size_t h,
            std::size_t w, const SsimOptions& opts = {});

MetricReport evaluate(std::span<const double> ref, std::span<const double> test, std::size_t h,
                      std::size_t w);

}  // namespace nld
