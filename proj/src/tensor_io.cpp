#include "ecvis/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace ecvis {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::string at_offset(std::size_t off) { return "at byte offset " + std::to_string(off); }

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype) {
  if (t.rank() > 255) throw Error(ErrorCode::DimOverflow, "rank exceeds 255");
  std::vector<std::uint8_t> out;
  const std::size_t elem = dtype == DType::F32 ? 4 : 1;
  out.reserve(8 + 4 * t.rank() + elem * t.size());
  out.insert(out.end(), {'E', 'C', 'V', 'T'});
  put_u16(out, kEcvtVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.dims()) {
    if (d == 0 || d > 0xFFFFFFFFull) throw Error(ErrorCode::DimOverflow, "dim out of u32 range");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (float v : t.values()) {
    if (dtype == DType::F32) {
      put_u32(out, std::bit_cast<std::uint32_t>(v));
    } else {
      if (!(v >= 0.0f && v <= 255.0f) || std::floor(v) != v) {
        throw Error(ErrorCode::IoFailure, "value not representable as u8");
      }
      out.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> b, DType* stored) {
  if (b.size() < 4 || b[0] != 'E' || b[1] != 'C' || b[2] != 'V' || b[3] != 'T') {
    throw Error(ErrorCode::BadMagic, "expected \"ECVT\" " + at_offset(0));
  }
  if (b.size() < 8) throw Error(ErrorCode::TruncatedPayload, "header ends " + at_offset(b.size()));
  const std::uint16_t version = static_cast<std::uint16_t>(b[4] | (b[5] << 8));
  if (version != kEcvtVersion) {
    throw Error(ErrorCode::BadHeader, "unsupported version " + std::to_string(version) + " " +
                                          at_offset(4));
  }
  if (b[6] > 1) throw Error(ErrorCode::BadHeader, "unknown dtype " + at_offset(6));
  const DType dtype = static_cast<DType>(b[6]);
  const std::size_t rank = b[7];
  std::size_t off = 8;
  if (b.size() < off + 4 * rank) {
    throw Error(ErrorCode::TruncatedPayload, "dims end " + at_offset(b.size()));
  }
  Dims dims;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, off += 4) {
    const std::uint32_t d = get_u32(b, off);
    if (d == 0) throw Error(ErrorCode::BadHeader, "zero dim " + at_offset(off));
    if (count > kEcvtMaxElements / d) {
      throw Error(ErrorCode::DimOverflow, "element count overflows " + at_offset(off));
    }
    count *= d;
    dims.push_back(d);
  }
  const std::size_t elem = dtype == DType::F32 ? 4 : 1;
  const std::size_t need = off + count * elem;
  if (b.size() < need) {
    throw Error(ErrorCode::TruncatedPayload, "payload ends " + at_offset(b.size()) +
                                                 ", expected " + std::to_string(need) + " bytes");
  }
  if (b.size() > need) throw Error(ErrorCode::BadHeader, "trailing bytes " + at_offset(need));
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = dtype == DType::F32 ? std::bit_cast<float>(get_u32(b, off + 4 * i))
                                  : static_cast<float>(b[off + i]);
  }
  if (stored) *stored = dtype;
  return Tensor(std::move(dims), std::move(data));
}

void write_tensor(const Tensor& t, const std::filesystem::path& path, DType dtype) {
  const auto bytes = encode_tensor(t, dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path, DType* stored) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_tensor(bytes, stored);
}

}  // namespace ecvis
