#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "nld/array_file.hpp"
#include "nld/calibration.hpp"
#include "nld/error.hpp"
#include "nld/metrics.hpp"
#include "nld/runner.hpp"
#include "nld/simulate.hpp"

namespace py = pybind11;
using namespace nld;

namespace {

using CArray = py::array_t<cdouble, py::array::c_style | py::array::forcecast>;
using RArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

void need_ndim(const py::array& a, py::ssize_t n, const char* what) {
  if (a.ndim() != n) fail(ErrorCode::shape_mismatch, std::string(what) + " must be " + std::to_string(n) + "-D");
}

ComplexImage image_in(const CArray& a) {
  need_ndim(a, 2, "image");
  ComplexImage img(a.shape(0), a.shape(1));
  std::memcpy(img.data.data(), a.data(), img.size() * sizeof(cdouble));
  return img;
}

MultiCoilKSpace kspace_in(const CArray& a) {
  need_ndim(a, 3, "k-space");
  MultiCoilKSpace k(a.shape(0), a.shape(1), a.shape(2));
  std::memcpy(k.data.data(), a.data(), k.data.size() * sizeof(cdouble));
  return k;
}

CoilSensitivities maps_in(const CArray& a) {
  need_ndim(a, 3, "maps");
  CoilSensitivities s(a.shape(0), a.shape(1), a.shape(2));
  std::memcpy(s.maps.data(), a.data(), s.maps.size() * sizeof(cdouble));
  return s;
}

SamplingMask mask_in(const py::array& a) {
  need_ndim(a, 2, "mask");
  const auto v = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(a);
  return mask_from_array(Array::real64({static_cast<std::uint64_t>(a.shape(0)), static_cast<std::uint64_t>(a.shape(1))},
                                       std::vector<double>(v.data(), v.data() + v.size())));
}

CArray image_out(const ComplexImage& img) {
  CArray out({img.h, img.w});
  std::memcpy(out.mutable_data(), img.data.data(), img.size() * sizeof(cdouble));
  return out;
}

CArray stack_out(std::size_t l, std::size_t h, std::size_t w, const std::vector<cdouble>& data) {
  CArray out({l, h, w});
  std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(cdouble));
  return out;
}

py::array_t<std::uint8_t> mask_out(const SamplingMask& m) {
  py::array_t<std::uint8_t> out({m.h, m.w});
  std::memcpy(out.mutable_data(), m.values.data(), m.values.size());
  return out;
}

std::span<const double> flat(const RArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

template <class T>
py::array vector_array(const std::vector<std::uint64_t>& shape, const std::vector<T>& v) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  py::array_t<T> out(dims);
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(T));
  return out;
}

py::array array_to_numpy(const Array& a) {
  return std::visit([&](const auto& v) { return vector_array(a.shape, v); }, a.data);
}

Array numpy_to_array(const py::array& a) {
  std::vector<std::uint64_t> shape(a.shape(), a.shape() + a.ndim());
  auto take = [&](auto tag) {
    using T = decltype(tag);
    const auto c = py::array_t<T, py::array::c_style>::ensure(a);
    return std::vector<T>(c.data(), c.data() + c.size());
  };
  if (py::isinstance<py::array_t<float>>(a)) return Array::real32(shape, take(float{}));
  if (py::isinstance<py::array_t<double>>(a)) return Array::real64(shape, take(double{}));
  if (py::isinstance<py::array_t<std::complex<float>>>(a)) return Array::complex64(shape, take(std::complex<float>{}));
  if (py::isinstance<py::array_t<cdouble>>(a)) return Array::complex128(shape, take(cdouble{}));
  fail(ErrorCode::bad_dtype, "array dtype must be float32, float64, complex64 or complex128");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Untrained U-net reconstruction of undersampled multi-coil MRI";

  static py::exception<Error> error_type(m, "NldError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("shepp_logan", [](std::size_t h, std::size_t w, double phase, std::uint64_t seed) {
    return image_out(shepp_logan(h, w, phase, seed));
  }, py::arg("h"), py::arg("w"), py::arg("phase_strength") = 1.0, py::arg("seed") = 0);

  m.def("simulate_coils", [](std::size_t l, std::size_t h, std::size_t w, std::uint64_t seed) {
    const CoilSensitivities s = simulate_coils(l, h, w, seed);
    return stack_out(s.coils, s.h, s.w, s.maps);
  }, py::arg("coils"), py::arg("h"), py::arg("w"), py::arg("seed") = 0);

  m.def("sample_pattern", [](const std::string& kind, std::size_t h, std::size_t w, int r_rows, int r_cols,
                             std::size_t acs) {
    return mask_out(sample_pattern(parse_pattern_kind(kind), h, w, r_rows, r_cols, acs));
  }, py::arg("kind"), py::arg("h"), py::arg("w"), py::arg("r_rows"), py::arg("r_cols") = 1, py::arg("acs") = 16);

  m.def("simulate_acquisition", [](const CArray& x, const CArray& maps, const py::array& mask, double sigma,
                                   std::uint64_t seed) {
    const Acquisition a = simulate_acquisition(image_in(x), maps_in(maps), mask_in(mask), sigma, seed);
    return py::make_tuple(stack_out(a.full.coils, a.full.h, a.full.w, a.full.data),
                          stack_out(a.undersampled.coils, a.undersampled.h, a.undersampled.w, a.undersampled.data));
  }, py::arg("x"), py::arg("maps"), py::arg("mask"), py::arg("noise_sigma") = 0.0, py::arg("seed") = 0,
     "Returns (full, undersampled) k-space, each [coils, H, W].");

  m.def("fft2c", [](const CArray& x) { return image_out(fft2c(image_in(x))); });
  m.def("ifft2c", [](const CArray& k) { return image_out(ifft2c(image_in(k))); });

  m.def("forward_op", [](const CArray& x, const CArray& maps, const py::array& mask) {
    const MultiCoilKSpace k = forward_op(image_in(x), maps_in(maps), mask_in(mask));
    return stack_out(k.coils, k.h, k.w, k.data);
  });
  m.def("adjoint_op", [](const CArray& d, const CArray& maps, const py::array& mask) {
    return image_out(adjoint_op(kspace_in(d), maps_in(maps), mask_in(mask)));
  });

  m.def("espirit_maps", [](const CArray& d, const py::array& mask, int kernel, double sv_thresh, double eig_thresh) {
    const MultiCoilKSpace k = kspace_in(d);
    const CoilSensitivities s = espirit_maps(extract_acs(k, mask_in(mask)), k.h, k.w, {kernel, sv_thresh, eig_thresh});
    return stack_out(s.coils, s.h, s.w, s.maps);
  }, py::arg("kspace"), py::arg("mask"), py::arg("kernel") = 6, py::arg("sv_thresh") = 0.01,
     py::arg("eig_thresh") = 0.9);

  m.def("grappa", [](const CArray& d, const py::array& mask, int r, double ridge) {
    const MultiCoilKSpace k = kspace_in(d);
    const SamplingMask p = mask_in(mask);
    const MultiCoilKSpace filled = grappa_apply(k, grappa_calibrate(extract_acs(k, p), r, {}, ridge), p);
    return stack_out(filled.coils, filled.h, filled.w, filled.data);
  }, py::arg("kspace"), py::arg("mask"), py::arg("r"), py::arg("ridge") = 1e-6,
     "Fills the skipped rows and returns the completed k-space.");

  m.def("rsos_image", [](const CArray& d) {
    const MultiCoilKSpace k = kspace_in(d);
    return vector_array<double>({k.h, k.w}, rsos_image(k));
  });

  m.def("reconstruct", [](const CArray& d, const CArray& maps, const py::array& mask, int iterations, double lr,
                          int depth, int filters, int kernel, double slope, bool regularized, double lam,
                          std::uint64_t seed) {
    ReconConfig cfg;
    cfg.iterations = iterations;
    cfg.lr = lr;
    cfg.unet.depth = depth;
    cfg.unet.filters = filters;
    cfg.unet.kernel = kernel;
    cfg.unet.slope = slope;
    cfg.regularized = regularized;
    cfg.lambda = lam;
    cfg.seed = seed;
    const MultiCoilKSpace k = kspace_in(d);
    const CoilSensitivities s = maps_in(maps);
    const SamplingMask p = mask_in(mask);
    ReconResult r;
    {
      py::gil_scoped_release release;
      r = reconstruct(k, s, p, cfg);
    }
    std::vector<double> data, reg, total;
    for (const auto& rec : r.loss_history) {
      data.push_back(rec.data);
      reg.push_back(rec.reg);
      total.push_back(rec.total);
    }
    py::dict out;
    out["image"] = image_out(r.image);
    out["zero_filled"] = image_out(r.zero_filled);
    out["scale"] = r.scale;
    out["iterations"] = r.iterations_run;
    out["loss_data"] = vector_array<double>({data.size()}, data);
    out["loss_reg"] = vector_array<double>({reg.size()}, reg);
    out["loss_total"] = vector_array<double>({total.size()}, total);
    return out;
  }, py::arg("kspace"), py::arg("maps"), py::arg("mask"), py::arg("iterations") = 2000, py::arg("lr") = 1e-3,
     py::arg("depth") = 4, py::arg("filters") = 128, py::arg("kernel") = 3, py::arg("slope") = 0.1,
     py::arg("regularized") = false, py::arg("lam") = 1e-6, py::arg("seed") = 0);

  m.def("nrmse", [](const RArray& ref, const RArray& test) { return nrmse(flat(ref), flat(test)); });
  m.def("psnr", [](const RArray& ref, const RArray& test) { return psnr(flat(ref), flat(test)); });
  m.def("ssim", [](const RArray& ref, const RArray& test) {
    need_ndim(ref, 2, "reference");
    return ssim(flat(ref), flat(test), ref.shape(0), ref.shape(1));
  });

  m.def("read_array", [](const std::string& path) { return array_to_numpy(read_array(path)); });
  m.def("write_array", [](const std::string& path, const py::array& a) { write_array(path, numpy_to_array(a)); });
  m.def("encode_array", [](const py::array& a) { return py::bytes(encode_array(numpy_to_array(a))); });
  m.def("decode_array", [](const py::bytes& b) { return array_to_numpy(decode_array(std::string(b))); });
}
