#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ecvis/tensor.hpp"

namespace ecvis {

/// ECVT layout, little-endian, no padding:
///   "ECVT" | version u16 (=1) | dtype u8 | rank u8 | rank x u32 dims | payload
enum class DType : std::uint8_t { F32 = 0, U8 = 1 };

inline constexpr std::uint16_t kEcvtVersion = 1;
inline constexpr std::size_t kEcvtMaxElements = std::size_t{1} << 34;

std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype = DType::F32);

/// Decodes a buffer; U8 payloads are widened to float. `stored` receives the
/// on-disk dtype when non-null.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, DType* stored = nullptr);

void write_tensor(const Tensor& t, const std::filesystem::path& path, DType dtype = DType::F32);
Tensor read_tensor(const std::filesystem::path& path, DType* stored = nullptr);

}  // namespace ecvis
