#include "photocov/cloud_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

#include "photocov/error.hpp"
#include "photocov/reconstruction_io.hpp"

namespace photocov {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary cloud formats assume a little-endian host");

constexpr std::array<const char*, 6> kCovFields = {"cov_xx", "cov_xy", "cov_xz",
                                                   "cov_yy", "cov_yz", "cov_zz"};

std::array<double, 9> fields(const CovarianceRecord& r) {
  return {r.x, r.y, r.z, r.cov_xx, r.cov_xy, r.cov_xz, r.cov_yy, r.cov_yz, r.cov_zz};
}

CovarianceRecord from_fields(const std::array<double, 9>& f) {
  return {f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]};
}

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof(T));
  }
  void put_text(const std::string& s, std::size_t width) {
    std::string f = s.substr(0, width);
    f.resize(width, '\0');
    out_ += f;
  }
  void zeros(std::size_t n) { out_.append(n, '\0'); }
  std::size_t size() const { return out_.size(); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& s) : s_(s) {}
  template <typename T>
  T get_at(std::size_t offset) const {
    if (offset + sizeof(T) > s_.size()) throw Error(ErrorCode::TruncatedPayload, "unexpected end of file");
    T v;
    std::memcpy(&v, s_.data() + offset, sizeof(T));
    return v;
  }
  std::string text_at(std::size_t offset, std::size_t width) const {
    if (offset + width > s_.size()) throw Error(ErrorCode::TruncatedPayload, "unexpected end of file");
    std::string t(s_.data() + offset, width);
    return t.substr(0, t.find('\0'));
  }
  std::size_t size() const { return s_.size(); }

 private:
  const std::string& s_;
};

constexpr std::uint16_t kLasHeaderSize = 375;
constexpr std::uint16_t kVlrHeaderSize = 54;
constexpr std::uint16_t kExtraBytesDescriptor = 192;
constexpr std::uint16_t kPointFormat6Size = 30;
constexpr std::uint8_t kExtraDouble = 10;

}  // namespace

CovarianceRecord to_record(const CovariantPoint& p) {
  const Mat3& s = p.sigma_g;
  return {p.position.x(), p.position.y(), p.position.z(), s(0, 0), s(0, 1), s(0, 2),
          s(1, 1),        s(1, 2),        s(2, 2)};
}

Mat3 record_covariance(const CovarianceRecord& r) {
  Mat3 m;
  m << r.cov_xx, r.cov_xy, r.cov_xz, r.cov_xy, r.cov_yy, r.cov_yz, r.cov_xz, r.cov_yz, r.cov_zz;
  return m;
}

CloudFormat cloud_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".las") return CloudFormat::LAS;
  if (ext == ".ply") return CloudFormat::PLY;
  if (ext == ".csv") return CloudFormat::CSV;
  throw Error(ErrorCode::IOError, "unknown point cloud extension '" + ext + "'");
}

std::string encode_las(std::span<const CovarianceRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no points to write");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const CovarianceRecord& r : records) {
    const Vec3 p(r.x, r.y, r.z);
    if (!p.allFinite()) throw Error(ErrorCode::IOError, "non-finite coordinate");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vec3 offset, scale;
  for (int a = 0; a < 3; ++a) {
    offset(a) = std::floor(lo(a));
    scale(a) = std::max(1e-4, (hi(a) - offset(a)) / 2.0e9);
  }

  const std::uint32_t vlr_length = 6 * kExtraBytesDescriptor;
  const std::uint32_t point_offset = kLasHeaderSize + kVlrHeaderSize + vlr_length;
  const std::uint16_t record_length = kPointFormat6Size + 6 * sizeof(double);

  ByteWriter w;
  w.put_text("LASF", 4);
  w.put<std::uint16_t>(0);   // file source id
  w.put<std::uint16_t>(16);  // global encoding: WKT
  w.zeros(16);               // project GUID
  w.put<std::uint8_t>(1);
  w.put<std::uint8_t>(4);
  w.put_text("photocov", 32);
  w.put_text("photocov covariance writer", 32);
  w.put<std::uint16_t>(0);  // creation day
  w.put<std::uint16_t>(0);  // creation year
  w.put<std::uint16_t>(kLasHeaderSize);
  w.put<std::uint32_t>(point_offset);
  w.put<std::uint32_t>(1);  // VLR count
  w.put<std::uint8_t>(6);
  w.put<std::uint16_t>(record_length);
  w.put<std::uint32_t>(0);  // legacy point count
  w.zeros(20);              // legacy points by return
  for (int a = 0; a < 3; ++a) w.put<double>(scale(a));
  for (int a = 0; a < 3; ++a) w.put<double>(offset(a));
  for (int a = 0; a < 3; ++a) {
    w.put<double>(hi(a));
    w.put<double>(lo(a));
  }
  w.put<std::uint64_t>(0);  // waveform
  w.put<std::uint64_t>(0);  // first EVLR
  w.put<std::uint32_t>(0);  // EVLR count
  w.put<std::uint64_t>(records.size());
  w.put<std::uint64_t>(records.size());  // all first returns
  w.zeros(14 * 8);

  w.put<std::uint16_t>(0);
  w.put_text("LASF_Spec", 16);
  w.put<std::uint16_t>(4);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(vlr_length));
  w.put_text("Point covariance (GPM-style)", 32);
  for (const char* name : kCovFields) {
    w.zeros(2);
    w.put<std::uint8_t>(kExtraDouble);
    w.put<std::uint8_t>(0);  // no options
    w.put_text(name, 32);
    w.zeros(4 + 24 + 24 + 24 + 24 + 24);
    w.put_text(std::string("upper-triangle covariance ") + (name + 4), 32);
  }

  for (const CovarianceRecord& r : records) {
    const double xyz[3] = {r.x, r.y, r.z};
    for (int a = 0; a < 3; ++a)
      w.put<std::int32_t>(static_cast<std::int32_t>(std::llround((xyz[a] - offset(a)) / scale(a))));
    w.put<std::uint16_t>(0);     // intensity
    w.put<std::uint8_t>(0x11);   // return 1 of 1
    w.put<std::uint8_t>(0);      // flags
    w.put<std::uint8_t>(0);      // classification
    w.put<std::uint8_t>(0);      // user data
    w.put<std::int16_t>(0);      // scan angle
    w.put<std::uint16_t>(0);     // point source
    w.put<double>(0.0);          // GPS time
    const std::array<double, 9> f = fields(r);
    for (int k = 3; k < 9; ++k) w.put<double>(f[k]);
  }
  return std::move(w.str());
}

std::vector<CovarianceRecord> decode_las(const std::string& bytes) {
  const ByteReader r(bytes);
  if (bytes.size() < kLasHeaderSize || r.text_at(0, 4) != "LASF")
    throw Error(ErrorCode::MalformedHeader, "missing LASF signature");
  const auto major = r.get_at<std::uint8_t>(24), minor = r.get_at<std::uint8_t>(25);
  if (major != 1 || minor < 2) throw Error(ErrorCode::MalformedHeader, "unsupported LAS version");
  const auto header_size = r.get_at<std::uint16_t>(94);
  const auto point_offset = r.get_at<std::uint32_t>(96);
  const auto vlr_count = r.get_at<std::uint32_t>(100);
  const auto format = static_cast<std::uint8_t>(r.get_at<std::uint8_t>(104) & 0x3f);
  const auto record_length = r.get_at<std::uint16_t>(105);
  std::uint64_t count = r.get_at<std::uint32_t>(107);
  if (minor >= 4 && header_size >= kLasHeaderSize) {
    const auto count64 = r.get_at<std::uint64_t>(247);
    if (count64 != 0) count = count64;
  }
  Vec3 scale, offset;
  for (int a = 0; a < 3; ++a) {
    scale(a) = r.get_at<double>(131 + 8 * a);
    offset(a) = r.get_at<double>(155 + 8 * a);
  }
  static constexpr std::uint16_t kBaseSize[] = {20, 28, 26, 34, 57, 63, 30, 36, 38, 59, 67};
  if (format > 10) throw Error(ErrorCode::MalformedHeader, "unknown point format");
  const std::uint16_t base = kBaseSize[format];
  if (record_length < base) throw Error(ErrorCode::MalformedHeader, "record shorter than its format");

  // Locate the covariance fields inside the extra bytes.
  std::array<int, 6> cov_offset;
  cov_offset.fill(-1);
  std::size_t pos = header_size;
  for (std::uint32_t v = 0; v < vlr_count; ++v) {
    const std::string user = r.text_at(pos + 2, 16);
    const auto record_id = r.get_at<std::uint16_t>(pos + 18);
    const auto length = r.get_at<std::uint16_t>(pos + 20);
    const std::size_t body = pos + kVlrHeaderSize;
    if (user == "LASF_Spec" && record_id == 4) {
      int running = 0;
      for (std::size_t d = 0; d + kExtraBytesDescriptor <= length; d += kExtraBytesDescriptor) {
        const auto type = r.get_at<std::uint8_t>(body + d + 2);
        const std::string name = r.text_at(body + d + 4, 32);
        static constexpr int kTypeSize[] = {0, 1, 1, 2, 2, 4, 4, 8, 8, 4, 8};
        int size = 0;
        if (type == 0)
          size = r.get_at<std::uint8_t>(body + d + 3);
        else if (type <= 10)
          size = kTypeSize[type];
        else
          throw Error(ErrorCode::MalformedHeader, "unsupported extra bytes type");
        for (int k = 0; k < 6; ++k) {
          if (name != kCovFields[k]) continue;
          if (type != kExtraDouble) throw Error(ErrorCode::MalformedHeader, name + " is not float64");
          cov_offset[k] = running;
        }
        running += size;
      }
    }
    pos = body + length;
  }
  for (int k = 0; k < 6; ++k)
    if (cov_offset[k] < 0)
      throw Error(ErrorCode::MalformedHeader, std::string("missing extra bytes field ") + kCovFields[k]);

  if (bytes.size() < point_offset + count * record_length)
    throw Error(ErrorCode::TruncatedPayload, "point records are truncated");
  std::vector<CovarianceRecord> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t p = point_offset + i * record_length;
    std::array<double, 9> f;
    for (int a = 0; a < 3; ++a) f[a] = r.get_at<std::int32_t>(p + 4 * a) * scale(a) + offset(a);
    for (int k = 0; k < 6; ++k) f[3 + k] = r.get_at<double>(p + base + cov_offset[k]);
    out.push_back(from_fields(f));
  }
  return out;
}

std::string encode_ply(std::span<const CovarianceRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no points to write");
  std::ostringstream head;
  head << "ply\nformat binary_little_endian 1.0\ncomment upper-triangle point covariance\n"
       << "element vertex " << records.size() << "\n";
  for (const char* f : kRecordFields) head << "property double " << f << "\n";
  head << "end_header\n";
  ByteWriter w;
  w.str() = head.str();
  for (const CovarianceRecord& r : records)
    for (double v : fields(r)) w.put<double>(v);
  return std::move(w.str());
}

std::vector<CovarianceRecord> decode_ply(const std::string& bytes) {
  const std::size_t end = bytes.find("end_header\n");
  if (bytes.rfind("ply\n", 0) != 0 || end == std::string::npos)
    throw Error(ErrorCode::MalformedHeader, "not a PLY file");
  std::istringstream head(bytes.substr(0, end));
  std::string line;
  std::size_t count = 0;
  bool little = false;
  std::vector<std::string> props;
  while (std::getline(head, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      little = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw Error(ErrorCode::MalformedHeader, "unexpected element " + name);
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type != "double") throw Error(ErrorCode::MalformedHeader, "property " + name + " is not double");
      props.push_back(name);
    }
  }
  if (!little) throw Error(ErrorCode::MalformedHeader, "only binary_little_endian PLY is supported");
  if (props.size() != kRecordFields.size() ||
      !std::equal(props.begin(), props.end(), kRecordFields.begin()))
    throw Error(ErrorCode::MalformedHeader, "unexpected vertex properties");
  const std::size_t data = end + std::string("end_header\n").size();
  if (bytes.size() < data + count * 9 * sizeof(double))
    throw Error(ErrorCode::TruncatedPayload, "vertex data is truncated");
  const ByteReader r(bytes);
  std::vector<CovarianceRecord> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::array<double, 9> f;
    for (int k = 0; k < 9; ++k) f[k] = r.get_at<double>(data + (i * 9 + k) * sizeof(double));
    out[i] = from_fields(f);
  }
  return out;
}

std::string encode_csv(std::span<const CovarianceRecord> records) {
  std::string out;
  for (std::size_t k = 0; k < kRecordFields.size(); ++k) {
    if (k) out += ',';
    out += kRecordFields[k];
  }
  out += '\n';
  char buf[40];
  for (const CovarianceRecord& r : records) {
    const std::array<double, 9> f = fields(r);
    for (int k = 0; k < 9; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", f[k]);
      if (k) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<CovarianceRecord> decode_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, "empty CSV");
  std::string expected;
  for (std::size_t k = 0; k < kRecordFields.size(); ++k) expected += (k ? "," : "") + std::string(kRecordFields[k]);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) throw Error(ErrorCode::MalformedHeader, "unexpected CSV header: " + line);
  std::vector<CovarianceRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::array<double, 9> f;
    const char* p = line.c_str();
    for (int k = 0; k < 9; ++k) {
      char* end = nullptr;
      f[k] = std::strtod(p, &end);
      if (end == p || (k < 8 && *end != ',') || (k == 8 && *end != '\0' && *end != '\r'))
        throw Error(ErrorCode::MalformedHeader, "bad CSV value on line " + std::to_string(row));
      p = end + 1;
    }
    out.push_back(from_fields(f));
  }
  return out;
}

void write_records(std::span<const CovarianceRecord> records, const std::filesystem::path& path,
                   CloudFormat format) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no points to write");
  switch (format) {
    case CloudFormat::LAS: write_text_file(path, encode_las(records)); break;
    case CloudFormat::PLY: write_text_file(path, encode_ply(records)); break;
    case CloudFormat::CSV: write_text_file(path, encode_csv(records)); break;
  }
}

void write_covariant_cloud(std::span<const CovariantPoint> points, const std::filesystem::path& path,
                           CloudFormat format) {
  std::vector<CovarianceRecord> records;
  records.reserve(points.size());
  for (const CovariantPoint& p : points) records.push_back(to_record(p));
  write_records(records, path, format);
}

std::vector<CovarianceRecord> read_covariant_cloud(const std::filesystem::path& path,
                                                   CloudFormat format) {
  const std::string bytes = read_text_file(path);
  std::vector<CovarianceRecord> recs;
  switch (format) {
    case CloudFormat::LAS: recs = decode_las(bytes); break;
    case CloudFormat::PLY: recs = decode_ply(bytes); break;
    case CloudFormat::CSV: recs = decode_csv(bytes); break;
  }
  for (std::size_t i = 0; i < recs.size(); ++i) {
    try {
      covariance_radius(record_covariance(recs[i]));
    } catch (const Error& e) {
      throw Error(ErrorCode::NotPSD, "point " + std::to_string(i) + ": " + e.what());
    }
  }
  return recs;
}

}  // namespace photocov
