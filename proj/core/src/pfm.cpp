#include "photocov/pfm.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "photocov/error.hpp"

namespace photocov {

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

constexpr bool kHostLittle = std::endian::native == std::endian::little;

/// Next whitespace-delimited token starting at `pos`.
std::string_view next_token(std::string_view s, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return s.substr(start, pos - start);
}

}  // namespace

std::string encode_pfm(const FloatGrid& grid) {
  if (grid.width() <= 0 || grid.height() <= 0)
    throw Error(ErrorCode::MalformedHeader, "PFM grid must have positive dimensions");
  std::ostringstream head;
  head << "Pf\n" << grid.width() << ' ' << grid.height() << "\n-1.0\n";
  std::string out = head.str();
  const std::size_t header = out.size();
  out.resize(header + grid.size() * 4);
  char* dst = out.data() + header;
  for (int row = grid.height() - 1; row >= 0; --row) {
    for (int col = 0; col < grid.width(); ++col) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(grid(col, row));
      if (!kHostLittle) bits = byteswap32(bits);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}

FloatGrid decode_pfm(std::string_view bytes) {
  std::size_t pos = 0;
  const std::string_view magic = next_token(bytes, pos);
  if (magic != "Pf")
    throw Error(ErrorCode::MalformedHeader,
                magic == "PF" ? "colour PFM is not supported" : "missing Pf signature");
  auto parse_int = [&](const char* what) {
    const std::string_view tok = next_token(bytes, pos);
    long long v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size())
      throw Error(ErrorCode::MalformedHeader, std::string("bad ") + what);
    if (v <= 0 || v > (1LL << 20))
      throw Error(ErrorCode::MalformedHeader, std::string(what) + " out of range");
    return static_cast<int>(v);
  };
  const int width = parse_int("width");
  const int height = parse_int("height");
  const std::string scale_tok(next_token(bytes, pos));
  char* end = nullptr;
  const double scale = std::strtod(scale_tok.c_str(), &end);
  if (scale_tok.empty() || end != scale_tok.c_str() + scale_tok.size() || !std::isfinite(scale) ||
      scale == 0.0)
    throw Error(ErrorCode::MalformedHeader, "bad scale token");
  // Exactly one whitespace byte separates the header from the payload.
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw Error(ErrorCode::TruncatedPayload, "missing payload");
  ++pos;
  const bool little = scale < 0.0;
  const std::size_t need = static_cast<std::size_t>(width) * height * 4;
  if (bytes.size() - pos < need)
    throw Error(ErrorCode::TruncatedPayload, "payload has " + std::to_string(bytes.size() - pos) +
                                                 " bytes, needs " + std::to_string(need));
  FloatGrid grid(width, height);
  const char* src = bytes.data() + pos;
  for (int row = height - 1; row >= 0; --row) {
    for (int col = 0; col < width; ++col) {
      std::uint32_t bits;
      std::memcpy(&bits, src, 4);
      src += 4;
      if (little != kHostLittle) bits = byteswap32(bits);
      grid(col, row) = std::bit_cast<float>(bits);
    }
  }
  return grid;
}

void write_pfm(const std::filesystem::path& path, const FloatGrid& grid) {
  const std::string bytes = encode_pfm(grid);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOError, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IOError, "write failed: " + path.string());
}

FloatGrid read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IOError, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pfm(bytes);
}

}  // namespace photocov
