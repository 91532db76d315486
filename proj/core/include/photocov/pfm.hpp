#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "photocov/grid.hpp"

namespace photocov {

/// Single-channel PFM ("Pf"). Written little-endian (negative scale) with
/// rows stored bottom to top; both byte orders are read. Float bits,
/// including NaN payloads, are preserved.
std::string encode_pfm(const FloatGrid& grid);

/// Throws MalformedHeader or TruncatedPayload.
FloatGrid decode_pfm(std::string_view bytes);

/// Throws IOError in addition to the decode errors.
void write_pfm(const std::filesystem::path& path, const FloatGrid& grid);
FloatGrid read_pfm(const std::filesystem::path& path);

}  // namespace photocov
