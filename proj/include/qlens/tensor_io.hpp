#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qlens/io_util.hpp"
#include "qlens/tensor.hpp"

namespace qlens {

// QTNS container, little-endian:
//   "QTNS" | u32 version=1 | u8 dtype (0 = float32) | u8 ndim (1..8) | u16 reserved=0
//   | ndim x u64 extents | row-major float32 payload
inline constexpr std::uint32_t kQtnsVersion = 1;
inline constexpr std::size_t kMaxDims = 8;

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

/// Shape header shared with the QTNQ container: u8 dtype | u8 ndim | u16 reserved | extents.
void write_shape_header(ByteWriter& w, std::uint8_t dtype, const Shape& shape);
Shape read_shape_header(ByteReader& r, std::uint8_t expected_dtype);

}  // namespace qlens
