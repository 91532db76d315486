#include "photocov/reconstruction_io.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "photocov/error.hpp"

namespace photocov {

namespace {

using nlohmann::json;

constexpr const char* kReconstructionFormat = "photocov.reconstruction";
constexpr const char* kPairsFormat = "photocov.pairs";

[[noreturn]] void violation(const std::string& pointer, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, (pointer.empty() ? "/" : pointer) + ": " + what);
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat3_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

/// Schema-checked view of one JSON object.
class Reader {
 public:
  Reader(const json& node, std::string pointer, const ReadOptions& options)
      : node_(node), pointer_(std::move(pointer)), options_(options) {
    if (!node_.is_object()) violation(pointer_, "expected an object");
  }

  const json& required(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) violation(pointer_ + "/" + key, "missing required field");
    return *it;
  }

  const json* optional(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return pointer_ + "/" + key; }

  double number(const std::string& key) {
    const json& v = required(key);
    if (!v.is_number()) violation(path(key), "expected a number");
    return v.get<double>();
  }

  int integer(const std::string& key) {
    const json& v = required(key);
    if (!v.is_number_integer()) violation(path(key), "expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key) {
    const json& v = required(key);
    if (!v.is_string()) violation(path(key), "expected a string");
    return v.get<std::string>();
  }

  Eigen::VectorXd vector(const std::string& key, int n) { return parse_vector(required(key), path(key), n); }

  Mat3 matrix3(const std::string& key) {
    const json& v = required(key);
    if (!v.is_array() || v.size() != 3) violation(path(key), "expected a 3x3 array");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      m.row(r) = parse_vector(v[r], path(key) + "/" + std::to_string(r), 3).transpose();
    return m;
  }

  const json& array(const std::string& key, bool is_required = true) {
    static const json empty = json::array();
    const json* v = is_required ? &required(key) : optional(key);
    if (v == nullptr) return empty;
    if (!v->is_array()) violation(path(key), "expected an array");
    return *v;
  }

  /// Flags keys that were never consumed.
  void finish() {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (seen_.count(it.key())) continue;
      if (options_.strict) violation(path(it.key()), "unknown field");
      if (options_.warnings) options_.warnings->push_back(path(it.key()) + ": unknown field ignored");
    }
  }

  static Eigen::VectorXd parse_vector(const json& v, const std::string& pointer, int n) {
    if (!v.is_array() || static_cast<int>(v.size()) != n)
      violation(pointer, "expected an array of " + std::to_string(n) + " numbers");
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) {
      if (!v[i].is_number()) violation(pointer + "/" + std::to_string(i), "expected a number");
      out(i) = v[i].get<double>();
    }
    return out;
  }

 private:
  const json& node_;
  std::string pointer_;
  const ReadOptions& options_;
  std::set<std::string> seen_;
};

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    violation("", std::string("not valid JSON: ") + e.what());
  }
}

void check_header(Reader& top, const char* format) {
  if (top.string("format") != format) violation("/format", std::string("expected \"") + format + "\"");
  const int version = top.integer("version");
  if (version != kReconstructionFormatVersion)
    violation("/version", "unsupported version " + std::to_string(version));
}

json camera_json(const Camera& c, int id) {
  return json{{"id", id},
              {"rotation", mat3_json(c.rotation)},
              {"center", vec_json(c.center)},
              {"focal", c.focal},
              {"principal_point", vec_json(c.principal_point)},
              {"image_size", json::array({c.image_size[0], c.image_size[1]})}};
}

json prior_json(const PositionPrior& p) {
  return json{{"target_id", p.target_id},
              {"position", vec_json(p.position)},
              {"covariance", mat3_json(p.covariance)}};
}

PositionPrior read_prior(const json& node, const std::string& pointer, const ReadOptions& options) {
  Reader r(node, pointer, options);
  PositionPrior p;
  p.target_id = r.integer("target_id");
  p.position = r.vector("position", 3);
  p.covariance = r.matrix3("covariance");
  r.finish();
  return p;
}

std::array<int, 2> read_size(Reader& r, const std::string& key) {
  const json& v = r.required(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    violation(r.path(key), "expected [width, height] integers");
  return {v[0].get<int>(), v[1].get<int>()};
}

}  // namespace

std::string reconstruction_to_json(const Reconstruction& recon) {
  json doc;
  doc["format"] = kReconstructionFormat;
  doc["version"] = kReconstructionFormatVersion;
  doc["shared_intrinsics"] = recon.shared_intrinsics;
  json cams = json::array();
  for (std::size_t i = 0; i < recon.cameras.size(); ++i)
    cams.push_back(camera_json(recon.cameras[i], static_cast<int>(i)));
  doc["cameras"] = std::move(cams);
  json pts = json::array();
  for (std::size_t i = 0; i < recon.points.size(); ++i)
    pts.push_back(json{{"id", static_cast<int>(i)}, {"position", vec_json(recon.points[i])}});
  doc["points"] = std::move(pts);
  json obs = json::array();
  for (const Observation& o : recon.observations)
    obs.push_back(json{{"camera_id", o.camera_id},
                       {"point_id", o.point_id},
                       {"pixel", vec_json(o.pixel)},
                       {"sigma_px", o.sigma_px}});
  doc["observations"] = std::move(obs);
  json gps = json::array(), gcp = json::array();
  for (const PositionPrior& p : recon.gps_priors) gps.push_back(prior_json(p));
  for (const PositionPrior& p : recon.gcp_priors) gcp.push_back(prior_json(p));
  doc["gps_priors"] = std::move(gps);
  doc["gcp_priors"] = std::move(gcp);
  return doc.dump(1) + "\n";
}

Reconstruction reconstruction_from_json(const std::string& text, const ReadOptions& options) {
  const json doc = parse_document(text);
  Reader top(doc, "", options);
  check_header(top, kReconstructionFormat);
  Reconstruction recon;
  if (const json* s = top.optional("shared_intrinsics")) {
    if (!s->is_boolean()) violation("/shared_intrinsics", "expected a boolean");
    recon.shared_intrinsics = s->get<bool>();
  }
  const json& cams = top.array("cameras");
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const std::string ptr = "/cameras/" + std::to_string(i);
    Reader r(cams[i], ptr, options);
    if (r.integer("id") != static_cast<int>(i)) violation(ptr + "/id", "ids must equal the array index");
    Camera c;
    c.rotation = r.matrix3("rotation");
    c.center = r.vector("center", 3);
    c.focal = r.number("focal");
    c.principal_point = r.vector("principal_point", 2);
    c.image_size = read_size(r, "image_size");
    r.finish();
    recon.cameras.push_back(c);
  }
  const json& pts = top.array("points");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string ptr = "/points/" + std::to_string(i);
    Reader r(pts[i], ptr, options);
    if (r.integer("id") != static_cast<int>(i)) violation(ptr + "/id", "ids must equal the array index");
    recon.points.push_back(r.vector("position", 3));
    r.finish();
  }
  const json& obs = top.array("observations");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    Reader r(obs[i], "/observations/" + std::to_string(i), options);
    Observation o;
    o.camera_id = r.integer("camera_id");
    o.point_id = r.integer("point_id");
    o.pixel = r.vector("pixel", 2);
    if (r.optional("sigma_px")) o.sigma_px = r.number("sigma_px");
    r.finish();
    recon.observations.push_back(o);
  }
  const json& gps = top.array("gps_priors", false);
  for (std::size_t i = 0; i < gps.size(); ++i)
    recon.gps_priors.push_back(read_prior(gps[i], "/gps_priors/" + std::to_string(i), options));
  const json& gcp = top.array("gcp_priors", false);
  for (std::size_t i = 0; i < gcp.size(); ++i)
    recon.gcp_priors.push_back(read_prior(gcp[i], "/gcp_priors/" + std::to_string(i), options));
  top.finish();
  validate(recon);
  return recon;
}

void write_reconstruction(const std::filesystem::path& path, const Reconstruction& recon) {
  write_text_file(path, reconstruction_to_json(recon));
}

Reconstruction read_reconstruction(const std::filesystem::path& path, const ReadOptions& options) {
  return reconstruction_from_json(read_text_file(path), options);
}

std::string pairs_to_json(const std::vector<PairRecord>& pairs) {
  json doc;
  doc["format"] = kPairsFormat;
  doc["version"] = kReconstructionFormatVersion;
  json arr = json::array();
  for (const PairRecord& p : pairs) {
    const StereoPairGeometry& g = p.geometry;
    arr.push_back(json{{"pair_id", p.pair_id},
                       {"reference_camera_id", g.reference_camera_id},
                       {"source_camera_id", g.source_camera_id},
                       {"rect_rotation_ref", mat3_json(g.rect_rotation_ref)},
                       {"rect_rotation_src", mat3_json(g.rect_rotation_src)},
                       {"rect_focal", g.rect_focal},
                       {"rect_principal", vec_json(g.rect_principal)},
                       {"baseline", g.baseline},
                       {"rect_image_size", json::array({g.rect_image_size[0], g.rect_image_size[1]})},
                       {"disparity_file", p.disparity_file},
                       {"cost_file", p.cost_file}});
  }
  doc["pairs"] = std::move(arr);
  return doc.dump(1) + "\n";
}

std::vector<PairRecord> pairs_from_json(const std::string& text, const ReadOptions& options) {
  const json doc = parse_document(text);
  Reader top(doc, "", options);
  check_header(top, kPairsFormat);
  std::vector<PairRecord> out;
  std::set<int> ids;
  const json& arr = top.array("pairs");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string ptr = "/pairs/" + std::to_string(i);
    Reader r(arr[i], ptr, options);
    PairRecord p;
    p.pair_id = r.integer("pair_id");
    if (!ids.insert(p.pair_id).second) violation(ptr + "/pair_id", "duplicate pair id");
    StereoPairGeometry& g = p.geometry;
    g.reference_camera_id = r.integer("reference_camera_id");
    g.source_camera_id = r.integer("source_camera_id");
    g.rect_rotation_ref = r.matrix3("rect_rotation_ref");
    g.rect_rotation_src = r.matrix3("rect_rotation_src");
    g.rect_focal = r.number("rect_focal");
    g.rect_principal = r.vector("rect_principal", 2);
    g.baseline = r.number("baseline");
    g.rect_image_size = read_size(r, "rect_image_size");
    p.disparity_file = r.string("disparity_file");
    p.cost_file = r.string("cost_file");
    r.finish();
    if (!(g.rect_focal > 0.0) || !(g.baseline > 0.0))
      violation(ptr, "rect_focal and baseline must be positive");
    if (g.rect_image_size[0] <= 0 || g.rect_image_size[1] <= 0)
      violation(ptr + "/rect_image_size", "must be positive");
    out.push_back(std::move(p));
  }
  top.finish();
  return out;
}

void write_pairs(const std::filesystem::path& path, const std::vector<PairRecord>& pairs) {
  write_text_file(path, pairs_to_json(pairs));
}

std::vector<PairRecord> read_pairs(const std::filesystem::path& path, const ReadOptions& options) {
  return pairs_from_json(read_text_file(path), options);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IOError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IOError, "write failed: " + path.string());
}

}  // namespace photocov
