#include "nld/array_file.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "nld/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "array files are little-endian; add byte swapping for this target");

namespace nld {

namespace {

constexpr char kMagic[4] = {'N', 'L', 'D', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kFixedHeader = 8;

std::uint64_t product(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

template <class T>
Array make(std::vector<std::uint64_t> shape, std::vector<T> values) {
  if (product(shape) != values.size()) {
    fail(ErrorCode::shape_mismatch, "array: extents do not match value count");
  }
  Array a;
  a.shape = std::move(shape);
  a.data = std::move(values);
  return a;
}

template <class T>
void decode_payload(std::string_view payload, std::size_t count, Array::Storage& out) {
  std::vector<T> values(count);
  if (count) std::memcpy(values.data(), payload.data(), count * sizeof(T));
  out = std::move(values);
}

std::vector<std::uint64_t> u64_shape(std::initializer_list<std::size_t> dims) {
  return {dims.begin(), dims.end()};
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::real32: return 4;
    case DType::real64: return 8;
    case DType::complex64: return 8;
    case DType::complex128: return 16;
  }
  return 0;
}

std::size_t Array::size() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

Array Array::real32(std::vector<std::uint64_t> shape, std::vector<float> values) {
  return make(std::move(shape), std::move(values));
}
Array Array::real64(std::vector<std::uint64_t> shape, std::vector<double> values) {
  return make(std::move(shape), std::move(values));
}
Array Array::complex64(std::vector<std::uint64_t> shape, std::vector<std::complex<float>> values) {
  return make(std::move(shape), std::move(values));
}
Array Array::complex128(std::vector<std::uint64_t> shape,
                        std::vector<std::complex<double>> values) {
  return make(std::move(shape), std::move(values));
}

std::vector<double> Array::as_real() const {
  return std::visit(
      [](const auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        std::vector<double> out;
        out.reserve(v.size());
        for (const auto& x : v) {
          if constexpr (std::is_floating_point_v<T>) {
            out.push_back(static_cast<double>(x));
          } else {
            if (x.imag() != 0) {
              fail(ErrorCode::invalid_argument, "array: expected real data, found complex values");
            }
            out.push_back(static_cast<double>(x.real()));
          }
        }
        return out;
      },
      data);
}

std::vector<std::complex<double>> Array::as_complex() const {
  return std::visit(
      [](const auto& v) {
        std::vector<std::complex<double>> out;
        out.reserve(v.size());
        for (const auto& x : v) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_floating_point_v<T>) {
            out.emplace_back(static_cast<double>(x), 0.0);
          } else {
            out.emplace_back(static_cast<double>(x.real()), static_cast<double>(x.imag()));
          }
        }
        return out;
      },
      data);
}

std::string encode_array(const Array& array) {
  if (array.shape.size() > 255) fail(ErrorCode::invalid_argument, "array: too many dimensions");
  if (product(array.shape) != array.size()) {
    fail(ErrorCode::shape_mismatch, "array: extents do not match value count");
  }
  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(array.dtype()));
  out.push_back(static_cast<char>(array.shape.size()));
  out.push_back('\0');
  for (std::uint64_t e : array.shape) {
    char buf[8];
    std::memcpy(buf, &e, 8);
    out.append(buf, 8);
  }
  std::visit(
      [&](const auto& v) {
        out.append(reinterpret_cast<const char*>(v.data()),
                   v.size() * sizeof(typename std::decay_t<decltype(v)>::value_type));
      },
      array.data);
  return out;
}

Array decode_array(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorCode::bad_magic, "bad magic");
  }
  if (bytes.size() < kFixedHeader) fail(ErrorCode::truncated, "truncated header");
  if (static_cast<std::uint8_t>(bytes[4]) != kVersion) {
    fail(ErrorCode::bad_version,
         "bad version " + std::to_string(static_cast<std::uint8_t>(bytes[4])));
  }
  const auto code = static_cast<std::uint8_t>(bytes[5]);
  if (code > 3) fail(ErrorCode::bad_dtype, "bad dtype " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t ndim = static_cast<std::uint8_t>(bytes[6]);
  const std::size_t header = kFixedHeader + 8 * ndim;
  if (bytes.size() < header) fail(ErrorCode::truncated, "truncated header");

  Array a;
  a.shape.resize(ndim);
  for (std::size_t i = 0; i < ndim; ++i) std::memcpy(&a.shape[i], bytes.data() + kFixedHeader + 8 * i, 8);
  const std::uint64_t count = product(a.shape);
  const std::string_view payload = bytes.substr(header);
  if (payload.size() != count * dtype_size(dtype)) {
    fail(ErrorCode::truncated, "payload is " + std::to_string(payload.size()) + " bytes, expected " +
                                   std::to_string(count * dtype_size(dtype)));
  }
  switch (dtype) {
    case DType::real32: decode_payload<float>(payload, count, a.data); break;
    case DType::real64: decode_payload<double>(payload, count, a.data); break;
    case DType::complex64: decode_payload<std::complex<float>>(payload, count, a.data); break;
    case DType::complex128: decode_payload<std::complex<double>>(payload, count, a.data); break;
  }
  return a;
}

void write_array(const std::string& path, const Array& array) {
  const std::string bytes = encode_array(array);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::io, "cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::io, "write failed: " + path);
}

Array read_array(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::io, "cannot open " + path);
  const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  return decode_array(bytes);
}

Array to_array(const ComplexImage& img) {
  return Array::complex128(u64_shape({img.h, img.w}), img.data);
}

Array to_array(const MultiCoilKSpace& k) {
  return Array::complex128(u64_shape({k.coils, k.h, k.w}), k.data);
}

Array to_array(const CoilSensitivities& maps) {
  return Array::complex128(u64_shape({maps.coils, maps.h, maps.w}), maps.maps);
}

Array to_array(const SamplingMask& mask) {
  return Array::real32(u64_shape({mask.h, mask.w}),
                       std::vector<float>(mask.values.begin(), mask.values.end()));
}

Array magnitude_array(const std::vector<double>& magnitude, std::size_t h, std::size_t w) {
  return Array::real64(u64_shape({h, w}), magnitude);
}

ComplexImage image_from_array(const Array& a) {
  if (a.shape.size() != 2) fail(ErrorCode::shape_mismatch, "image file must be 2-D");
  ComplexImage img(a.shape[0], a.shape[1]);
  img.data = a.as_complex();
  return img;
}

MultiCoilKSpace kspace_from_array(const Array& a) {
  if (a.shape.size() != 3) fail(ErrorCode::shape_mismatch, "k-space file must be [coils,h,w]");
  MultiCoilKSpace k(a.shape[0], a.shape[1], a.shape[2]);
  k.data = a.as_complex();
  return k;
}

CoilSensitivities maps_from_array(const Array& a) {
  if (a.shape.size() != 3) fail(ErrorCode::shape_mismatch, "maps file must be [coils,h,w]");
  CoilSensitivities s(a.shape[0], a.shape[1], a.shape[2]);
  s.maps = a.as_complex();
  const std::size_t n = s.h * s.w;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t l = 0; l < s.coils; ++l) any = any || s.maps[l * n + i] != cdouble{};
    s.support[i] = any ? 1 : 0;
  }
  return s;
}

SamplingMask mask_from_array(const Array& a) {
  if (a.shape.size() != 2) fail(ErrorCode::shape_mismatch, "mask file must be 2-D");
  SamplingMask m(a.shape[0], a.shape[1]);
  const auto values = a.as_real();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0 && values[i] != 1.0) {
      fail(ErrorCode::invalid_argument, "mask values must be 0 or 1");
    }
    m.values[i] = values[i] != 0.0 ? 1 : 0;
  }
  m.acs = infer_acs(m);
  return m;
}

AcsRect infer_acs(const SamplingMask& mask) {
  const std::size_t cy = mask.h / 2, cx = mask.w / 2;
  if (mask.h == 0 || mask.w == 0 || !mask.sampled(cy, cx)) return {};
  std::size_t top = cy, bottom = cy + 1, left = cx, right = cx + 1;  // half-open
  auto row_full = [&](std::size_t y) {
    for (std::size_t x = left; x < right; ++x)
      if (!mask.sampled(y, x)) return false;
    return true;
  };
  auto col_full = [&](std::size_t x) {
    for (std::size_t y = top; y < bottom; ++y)
      if (!mask.sampled(y, x)) return false;
    return true;
  };
  for (bool grew = true; grew;) {
    grew = false;
    if (top > 0 && row_full(top - 1)) { --top; grew = true; }
    if (bottom < mask.h && row_full(bottom)) { ++bottom; grew = true; }
    if (left > 0 && col_full(left - 1)) { --left; grew = true; }
    if (right < mask.w && col_full(right)) { ++right; grew = true; }
  }
  return {top, left, bottom - top, right - left};
}

}  // namespace nld
