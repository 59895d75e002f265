#include "qlens/tensor_io.hpp"

#include <bit>
#include <cstring>

#include "qlens/error.hpp"

namespace qlens {

static_assert(std::endian::native == std::endian::little, "payload copies assume little-endian hosts");

void write_shape_header(ByteWriter& w, std::uint8_t dtype, const Shape& shape) {
  w.u8(dtype);
  w.u8(static_cast<std::uint8_t>(shape.size()));
  w.u16(0);
  for (std::size_t e : shape) w.u64(e);
}

Shape read_shape_header(ByteReader& r, std::uint8_t expected_dtype) {
  const std::uint8_t dtype = r.u8();
  if (dtype != expected_dtype)
    fail(ErrorKind::kInvalidArgument, "unsupported dtype code " + std::to_string(dtype));
  const std::uint8_t ndim = r.u8();
  if (ndim < 1 || ndim > kMaxDims)
    fail(ErrorKind::kInvalidArgument, "ndim must be in 1..8, got " + std::to_string(ndim));
  if (r.u16() != 0) fail(ErrorKind::kInvalidArgument, "reserved header field is nonzero");
  Shape shape(ndim);
  for (auto& e : shape) {
    e = r.u64();
    if (e == 0) fail(ErrorKind::kInvalidArgument, "zero extent in shape header");
  }
  return shape;
}

std::string encode_tensor(const Tensor& t) {
  require(!t.empty(), ErrorKind::kEmptyInput, "empty input");
  require(t.ndim() <= kMaxDims, ErrorKind::kInvalidArgument, "QTNS supports at most 8 dims");
  ByteWriter w;
  w.raw("QTNS");
  w.u32(kQtnsVersion);
  write_shape_header(w, 0, t.shape());
  w.raw({reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(float)});
  return w.bytes();
}

Tensor decode_tensor(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.raw(4) != "QTNS") fail(ErrorKind::kBadMagic, "bad magic");
  const std::uint32_t version = r.u32();
  if (version != kQtnsVersion) fail(ErrorKind::kBadVersion, "unsupported QTNS version " + std::to_string(version));
  Shape shape = read_shape_header(r, 0);
  const std::size_t n = numel(shape);
  if (n > r.remaining() / sizeof(float)) fail(ErrorKind::kUnexpectedEof, "unexpected end of file");
  std::vector<float> data(n);
  const auto payload = r.raw(n * sizeof(float));
  std::memcpy(data.data(), payload.data(), payload.size());
  if (r.remaining() != 0) fail(ErrorKind::kInvalidArgument, "trailing bytes after QTNS payload");
  return Tensor(std::move(shape), std::move(data));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_atomic(path, encode_tensor(t));
}

}  // namespace qlens
