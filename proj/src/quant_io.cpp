#include <cstring>

#include "qlens/error.hpp"
#include "qlens/quant.hpp"
#include "qlens/tensor_io.hpp"

namespace qlens {

namespace {

constexpr std::uint8_t kCodesDtype = 1;

}  // namespace

std::string encode_quantized(const QuantizedTensor& q) {
  validate(q);
  require(q.shape.size() <= kMaxDims, ErrorKind::kInvalidArgument, "QTNQ supports at most 8 dims");
  ByteWriter w;
  w.raw("QTNQ");
  w.u32(kQtnqVersion);
  w.u8(static_cast<std::uint8_t>(q.scheme.bits));
  w.u8(static_cast<std::uint8_t>(q.scheme.policy.index()));
  w.u8(static_cast<std::uint8_t>(q.scheme.granularity.index()));
  std::size_t axis = 0, group_size = 0;
  if (const auto* c = std::get_if<PerChannel>(&q.scheme.granularity)) axis = c->axis;
  if (const auto* g = std::get_if<PerGroup>(&q.scheme.granularity)) {
    axis = g->axis;
    group_size = g->group_size;
  }
  w.u8(static_cast<std::uint8_t>(axis));
  w.u32(static_cast<std::uint32_t>(group_size));
  const auto* power = std::get_if<SignedPower>(&q.scheme.transform);
  w.u8(power ? 1 : 0);
  w.f64(power ? power->exponent : 1.0);
  w.u64(q.group_count());
  for (std::size_t g = 0; g < q.group_count(); ++g) {
    w.f32(q.scales[g]);
    w.u16(q.zero_points[g]);
  }
  write_shape_header(w, kCodesDtype, q.shape);
  w.raw({reinterpret_cast<const char*>(q.codes.data()), q.codes.size()});
  return w.bytes();
}

QuantizedTensor decode_quantized(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.raw(4) != "QTNQ") fail(ErrorKind::kBadMagic, "bad magic");
  const std::uint32_t version = r.u32();
  if (version != kQtnqVersion) fail(ErrorKind::kBadVersion, "unsupported QTNQ version " + std::to_string(version));

  QuantizedTensor q;
  q.scheme.bits = r.u8();
  if (q.scheme.bits < 2 || q.scheme.bits > 8)
    fail(ErrorKind::kInvalidArgument, "bits must be in [2, 8], got " + std::to_string(q.scheme.bits));
  const std::uint8_t policy = r.u8();
  const std::uint8_t gran = r.u8();
  const std::uint8_t axis = r.u8();
  const std::uint32_t group_size = r.u32();
  const std::uint8_t transform = r.u8();
  const double exponent = r.f64();
  const std::uint64_t groups = r.u64();
  if (groups > r.remaining() / 6) fail(ErrorKind::kUnexpectedEof, "unexpected end of file");
  q.scales.resize(groups);
  q.zero_points.resize(groups);
  for (std::uint64_t g = 0; g < groups; ++g) {
    q.scales[g] = r.f32();
    q.zero_points[g] = r.u16();
  }

  switch (policy) {
    case 0: q.scheme.policy = AbsmaxSymmetric{}; break;
    case 1: q.scheme.policy = MinMaxAsymmetric{}; break;
    case 2: {
      if (groups == 0) fail(ErrorKind::kInvalidArgument, "fixed policy without groups");
      q.scheme.policy = FixedScale{static_cast<double>(q.scales[0]) * (1u << (q.scheme.bits - 1))};
      break;
    }
    default: fail(ErrorKind::kInvalidArgument, "unknown policy code " + std::to_string(policy));
  }
  switch (gran) {
    case 0: q.scheme.granularity = PerTensor{}; break;
    case 1: q.scheme.granularity = PerChannel{axis}; break;
    case 2: q.scheme.granularity = PerGroup{axis, group_size}; break;
    default: fail(ErrorKind::kInvalidArgument, "unknown granularity code " + std::to_string(gran));
  }
  switch (transform) {
    case 0: q.scheme.transform = Identity{}; break;
    case 1: q.scheme.transform = SignedPower{exponent}; break;
    default: fail(ErrorKind::kInvalidArgument, "unknown transform code " + std::to_string(transform));
  }

  q.shape = read_shape_header(r, kCodesDtype);
  const std::size_t n = numel(q.shape);
  const auto payload = r.raw(n);
  q.codes.resize(n);
  std::memcpy(q.codes.data(), payload.data(), n);
  if (r.remaining() != 0) fail(ErrorKind::kInvalidArgument, "trailing bytes after QTNQ payload");
  validate(q);
  return q;
}

QuantizedTensor read_quantized(const std::filesystem::path& path) {
  return decode_quantized(read_file(path));
}

void write_quantized(const std::filesystem::path& path, const QuantizedTensor& q) {
  write_file_atomic(path, encode_quantized(q));
}

}  // namespace qlens
