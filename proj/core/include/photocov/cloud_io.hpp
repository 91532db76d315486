#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "photocov/propagation.hpp"

namespace photocov {

/// One point with the upper triangle of its covariance.
struct CovarianceRecord {
  double x = 0.0, y = 0.0, z = 0.0;
  double cov_xx = 0.0, cov_xy = 0.0, cov_xz = 0.0;
  double cov_yy = 0.0, cov_yz = 0.0, cov_zz = 0.0;

  bool operator==(const CovarianceRecord&) const = default;
};

/// Field names in the fixed on-disk order.
inline constexpr std::array<const char*, 9> kRecordFields = {
    "x", "y", "z", "cov_xx", "cov_xy", "cov_xz", "cov_yy", "cov_yz", "cov_zz"};

CovarianceRecord to_record(const CovariantPoint& p);
Mat3 record_covariance(const CovarianceRecord& r);

enum class CloudFormat { LAS, PLY, CSV };

/// From the extension (.las, .ply, .csv). Throws IOError.
CloudFormat cloud_format_from_path(const std::filesystem::path& path);

/// LAS 1.4 point format 6 with an Extra Bytes VLR of six float64
/// covariance fields. XYZ are stored as scaled int32, so LAS coordinates are
/// quantized to the header scale (0.1 mm by default); the covariance fields
/// are exact.
std::string encode_las(std::span<const CovarianceRecord> records);
std::vector<CovarianceRecord> decode_las(const std::string& bytes);

/// Binary little-endian PLY with nine float64 vertex properties.
std::string encode_ply(std::span<const CovarianceRecord> records);
std::vector<CovarianceRecord> decode_ply(const std::string& bytes);

/// Header row plus one row per point, printed with 17 significant digits.
std::string encode_csv(std::span<const CovarianceRecord> records);
std::vector<CovarianceRecord> decode_csv(const std::string& text);

/// Throws EmptyInput or IOError.
void write_covariant_cloud(std::span<const CovariantPoint> points, const std::filesystem::path& path,
                           CloudFormat format);
void write_records(std::span<const CovarianceRecord> records, const std::filesystem::path& path,
                   CloudFormat format);

/// Throws MalformedHeader, TruncatedPayload, IOError, or NotPSD when a
/// decoded covariance has an eigenvalue below -1e-8 trace.
std::vector<CovarianceRecord> read_covariant_cloud(const std::filesystem::path& path,
                                                   CloudFormat format);

}  // namespace photocov
