#include "photocov/table_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "photocov/error.hpp"
#include "photocov/reconstruction_io.hpp"

namespace photocov {

namespace {

constexpr const char* kTableHeader = "pair_id,cost_min,cost_max,bin,cost_center,sigma,count";
constexpr const char* kDenseHeader =
    "point_id,reference_camera_id,col,row,x,y,z,view_count,agree_mask,pair_ids";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0')
    throw Error(ErrorCode::MalformedHeader, "bad number '" + s + "' on line " + std::to_string(line));
  return v;
}

long parse_long(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0')
    throw Error(ErrorCode::MalformedHeader, "bad integer '" + s + "' on line " + std::to_string(line));
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string c_sigma_tables_to_csv(std::span<const CSigmaTable> tables) {
  std::string out = std::string(kTableHeader) + "\n";
  for (const CSigmaTable& t : tables) {
    for (std::size_t b = 0; b < t.bins.size(); ++b) {
      const CSigmaBin& bin = t.bins[b];
      out += std::to_string(t.pair_id) + "," + format_double(t.cost_min) + "," +
             format_double(t.cost_max) + "," + std::to_string(b) + "," +
             format_double(bin.cost_center) + "," + format_double(bin.sigma) + "," +
             std::to_string(bin.count) + "\n";
    }
  }
  return out;
}

std::vector<CSigmaTable> c_sigma_tables_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTableHeader)
    throw Error(ErrorCode::MalformedHeader, "unexpected c-sigma table header");
  std::vector<CSigmaTable> out;
  std::map<int, std::size_t> slot;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const std::vector<std::string> c = split(line);
    if (c.size() != 7) throw Error(ErrorCode::MalformedHeader, "expected 7 columns on line " + std::to_string(n));
    const int pair_id = static_cast<int>(parse_long(c[0], n));
    auto [it, inserted] = slot.emplace(pair_id, out.size());
    if (inserted) {
      CSigmaTable t;
      t.pair_id = pair_id;
      t.cost_min = parse_double(c[1], n);
      t.cost_max = parse_double(c[2], n);
      out.push_back(t);
    }
    CSigmaTable& t = out[it->second];
    if (parse_long(c[3], n) != static_cast<long>(t.bins.size()))
      throw Error(ErrorCode::MalformedHeader, "bins out of order on line " + std::to_string(n));
    CSigmaBin bin;
    bin.cost_center = parse_double(c[4], n);
    bin.sigma = parse_double(c[5], n);
    bin.count = static_cast<int>(parse_long(c[6], n));
    if (!(bin.sigma >= 0.0) || bin.count < 0)
      throw Error(ErrorCode::MalformedHeader, "negative sigma or count on line " + std::to_string(n));
    t.bins.push_back(bin);
  }
  return out;
}

void write_c_sigma_tables(const std::filesystem::path& path, std::span<const CSigmaTable> tables) {
  write_text_file(path, c_sigma_tables_to_csv(tables));
}

std::vector<CSigmaTable> read_c_sigma_tables(const std::filesystem::path& path) {
  return c_sigma_tables_from_csv(read_text_file(path));
}

std::string dense_points_to_csv(std::span<const DensePoint> points) {
  std::string out = std::string(kDenseHeader) + "\n";
  for (const DensePoint& p : points) {
    out += std::to_string(p.point_id) + "," + std::to_string(p.reference_camera_id) + "," +
           format_double(p.pixel.x()) + "," + format_double(p.pixel.y()) + "," +
           format_double(p.position.x()) + "," + format_double(p.position.y()) + "," +
           format_double(p.position.z()) + "," + std::to_string(p.view_count) + "," +
           std::to_string(p.agree_mask) + ",";
    for (std::size_t k = 0; k < p.pair_ids.size(); ++k)
      out += (k ? ";" : "") + std::to_string(p.pair_ids[k]);
    out += "\n";
  }
  return out;
}

std::vector<DensePoint> dense_points_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kDenseHeader)
    throw Error(ErrorCode::MalformedHeader, "unexpected dense point header");
  std::vector<DensePoint> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> c = split(line);
    if (c.size() == 9 && line.back() == ',') c.emplace_back();
    if (c.size() != 10) throw Error(ErrorCode::MalformedHeader, "expected 10 columns on line " + std::to_string(n));
    DensePoint p;
    p.point_id = static_cast<int>(parse_long(c[0], n));
    p.reference_camera_id = static_cast<int>(parse_long(c[1], n));
    p.pixel = Vec2(parse_double(c[2], n), parse_double(c[3], n));
    p.position = Vec3(parse_double(c[4], n), parse_double(c[5], n), parse_double(c[6], n));
    p.view_count = static_cast<int>(parse_long(c[7], n));
    p.agree_mask = static_cast<std::uint32_t>(parse_long(c[8], n));
    std::istringstream ids(c[9]);
    std::string id;
    while (std::getline(ids, id, ';')) p.pair_ids.push_back(static_cast<int>(parse_long(id, n)));
    out.push_back(std::move(p));
  }
  return out;
}

void write_dense_points(const std::filesystem::path& path, std::span<const DensePoint> points) {
  write_text_file(path, dense_points_to_csv(points));
}

std::vector<DensePoint> read_dense_points(const std::filesystem::path& path) {
  return dense_points_from_csv(read_text_file(path));
}

std::string samples_to_csv(std::span<const NViewSample> samples) {
  std::string out = "pair_id,point_id,view_count,cost,residual\n";
  for (const NViewSample& s : samples)
    out += std::to_string(s.pair_id) + "," + std::to_string(s.point_id) + "," +
           std::to_string(s.view_count) + "," + format_double(s.cost) + "," +
           format_double(s.residual) + "\n";
  return out;
}

std::string metric_report_to_csv(const MetricReport& r, const std::string& label) {
  std::string out = "label,pearson,mean_err,rmse,kl_divergence,bounding_rate,auc_mean,auc_rmse\n";
  out += label + "," + (r.pearson_defined ? format_double(r.pearson) : std::string("nan")) + "," +
         format_double(r.mean_err) + "," + format_double(r.rmse) + "," +
         format_double(r.kl_divergence) + "," + format_double(r.bounding_rate) + "," +
         format_double(r.auc_mean) + "," + format_double(r.auc_rmse) + "\n";
  return out;
}

std::string auc_curve_to_csv(const AucCurve& curve) {
  std::string out = "scale,bounding_rate,mean_err,rmse\n";
  for (const AucPoint& p : curve.points)
    out += format_double(p.scale) + "," + format_double(p.bounding_rate) + "," +
           format_double(p.mean_err) + "," + format_double(p.rmse) + "\n";
  return out;
}

}  // namespace photocov
