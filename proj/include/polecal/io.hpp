#ifndef POLECAL_IO_HPP
#define POLECAL_IO_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "polecal/cloud.hpp"
#include "polecal/error.hpp"
#include "polecal/geometry.hpp"
#include "polecal/simulator.hpp"

namespace polecal {

namespace detail {

/// Shortest round-trip-lossless decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw Error(ErrorCode::ConfigError, context + ": not a number: '" + s + "'");
  }
  return v;
}

inline long long parse_int(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw Error(ErrorCode::ConfigError, context + ": not an integer: '" + s + "'");
  }
  return v;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, path + ": cannot open for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoError, path + ": cannot open for writing");
  }
  out << text;
  if (!out) {
    throw Error(ErrorCode::IoError, path + ": write failed");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Point cloud files

/// ASCII PCD with fields x y z intensity [ring]; coordinates at fixed
/// 6-decimal precision.
inline std::string serialize_pcd(const PointCloud& cloud) {
  cloud.validate();
  const bool ring = cloud.has_ring();
  std::ostringstream out;
  out << "# .PCD v0.7 - Point Cloud Data file format\n";
  out << "VERSION 0.7\n";
  out << (ring ? "FIELDS x y z intensity ring\n" : "FIELDS x y z intensity\n");
  out << (ring ? "SIZE 4 4 4 4 4\n" : "SIZE 4 4 4 4\n");
  out << (ring ? "TYPE F F F F I\n" : "TYPE F F F F\n");
  out << (ring ? "COUNT 1 1 1 1 1\n" : "COUNT 1 1 1 1\n");
  out << "WIDTH " << cloud.size() << "\n";
  out << "HEIGHT 1\n";
  out << "VIEWPOINT 0 0 0 1 0 0 0\n";
  out << "POINTS " << cloud.size() << "\n";
  out << "DATA ascii\n";
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (ring) {
      std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f %d\n", p.x(), p.y(),
                    p.z(), cloud.intensities[i], cloud.ring[i]);
    } else {
      std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f\n", p.x(), p.y(),
                    p.z(), cloud.intensities[i]);
    }
    out << buf;
  }
  return out.str();
}

inline PointCloud parse_pcd(const std::string& text, const std::string& name = "<pcd>") {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::size_t declared_points = 0;
  bool have_points = false;
  bool data_ascii = false;
  std::vector<std::string> fields;

  const auto fail = [&](const std::string& msg) -> Error {
    return Error(ErrorCode::IoError,
                 name + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string key;
    ls >> key;
    if (key == "FIELDS") {
      std::string f;
      while (ls >> f) fields.push_back(f);
    } else if (key == "POINTS") {
      long long n = 0;
      if (!(ls >> n) || n < 0) throw fail("bad POINTS count");
      declared_points = static_cast<std::size_t>(n);
      have_points = true;
    } else if (key == "DATA") {
      std::string mode;
      ls >> mode;
      if (mode != "ascii") throw fail("only DATA ascii is supported");
      data_ascii = true;
      break;
    } else if (key == "VERSION" || key == "SIZE" || key == "TYPE" ||
               key == "COUNT" || key == "WIDTH" || key == "HEIGHT" ||
               key == "VIEWPOINT") {
      // Accepted and ignored.
    } else {
      throw fail("unknown header keyword '" + key + "'");
    }
  }
  if (!data_ascii) {
    throw fail("missing DATA ascii header");
  }
  int xi = -1, yi = -1, zi = -1, ii = -1, ri = -1;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k] == "x") xi = static_cast<int>(k);
    if (fields[k] == "y") yi = static_cast<int>(k);
    if (fields[k] == "z") zi = static_cast<int>(k);
    if (fields[k] == "intensity") ii = static_cast<int>(k);
    if (fields[k] == "ring") ri = static_cast<int>(k);
  }
  if (xi < 0 || yi < 0 || zi < 0 || ii < 0) {
    throw fail("FIELDS must include x y z intensity");
  }

  PointCloud cloud;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    std::istringstream ls(t);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.size() < fields.size()) {
      throw fail("expected " + std::to_string(fields.size()) + " fields, got " +
                 std::to_string(tokens.size()));
    }
    const std::string ctx = name + ":" + std::to_string(line_no);
    const Vec3 p(detail::parse_double(tokens[xi], ctx),
                 detail::parse_double(tokens[yi], ctx),
                 detail::parse_double(tokens[zi], ctx));
    const double intensity = detail::parse_double(tokens[ii], ctx);
    const int ring = ri >= 0 ? static_cast<int>(detail::parse_int(tokens[ri], ctx)) : -1;
    cloud.push_back(p, intensity, ring);
  }
  if (ri < 0) cloud.ring.clear();
  if (have_points && cloud.size() != declared_points) {
    throw Error(ErrorCode::IoError,
                name + ": POINTS says " + std::to_string(declared_points) +
                    " but file has " + std::to_string(cloud.size()));
  }
  cloud.validate();
  return cloud;
}

/// CSV fallback: optional "x,y,z,intensity[,ring]" header then rows.
inline std::string serialize_csv(const PointCloud& cloud) {
  cloud.validate();
  const bool ring = cloud.has_ring();
  std::ostringstream out;
  out << (ring ? "x,y,z,intensity,ring\n" : "x,y,z,intensity\n");
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (ring) {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%d\n", p.x(), p.y(),
                    p.z(), cloud.intensities[i], cloud.ring[i]);
    } else {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f\n", p.x(), p.y(),
                    p.z(), cloud.intensities[i]);
    }
    out << buf;
  }
  return out.str();
}

inline PointCloud parse_csv(const std::string& text, const std::string& name = "<csv>") {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool any_ring = false;
  PointCloud cloud;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    std::vector<std::string> tokens;
    std::string cell;
    std::istringstream ls(t);
    while (std::getline(ls, cell, ',')) tokens.push_back(detail::trim(cell));
    if (line_no == 1 && !tokens.empty() && tokens[0] == "x") continue;  // header
    if (tokens.size() != 4 && tokens.size() != 5) {
      throw Error(ErrorCode::IoError,
                  name + ":" + std::to_string(line_no) +
                      ": expected 4 or 5 comma-separated values");
    }
    const std::string ctx = name + ":" + std::to_string(line_no);
    const Vec3 p(detail::parse_double(tokens[0], ctx),
                 detail::parse_double(tokens[1], ctx),
                 detail::parse_double(tokens[2], ctx));
    const double intensity = detail::parse_double(tokens[3], ctx);
    const int ring = tokens.size() == 5
                         ? static_cast<int>(detail::parse_int(tokens[4], ctx))
                         : -1;
    any_ring = any_ring || tokens.size() == 5;
    cloud.push_back(p, intensity, ring);
  }
  if (!any_ring) cloud.ring.clear();
  cloud.validate();
  return cloud;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Reads .pcd or .csv based on the extension.
inline PointCloud read_cloud(const std::string& path) {
  const std::string text = detail::read_text_file(path);
  if (ends_with(path, ".csv")) return parse_csv(text, path);
  if (ends_with(path, ".pcd")) return parse_pcd(text, path);
  throw Error(ErrorCode::IoError, path + ": unsupported extension (want .pcd or .csv)");
}

inline void write_cloud(const std::string& path, const PointCloud& cloud) {
  if (ends_with(path, ".csv")) {
    detail::write_text_file(path, serialize_csv(cloud));
  } else if (ends_with(path, ".pcd")) {
    detail::write_text_file(path, serialize_pcd(cloud));
  } else {
    throw Error(ErrorCode::IoError, path + ": unsupported extension (want .pcd or .csv)");
  }
}

// ---------------------------------------------------------------------------
// Ordered key=value documents (configs, manifests, reports)

/// Line-oriented "key=value" document that serializes deterministically
/// (insertion order, '%.17g' doubles) so identical content is identical
/// bytes. '#' starts a comment line; '[section]' prefixes following keys
/// with "section.".
class KeyValueDocument {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }
  void set_double(const std::string& key, double v) {
    set(key, detail::format_double(v));
  }
  void set_int(const std::string& key, long long v) { set(key, std::to_string(v)); }
  void set_uint(const std::string& key, std::uint64_t v) { set(key, std::to_string(v)); }
  void set_bool(const std::string& key, bool v) { set(key, v ? "true" : "false"); }
  void set_vec3(const std::string& key, const Vec3& v) {
    set(key, detail::format_double(v.x()) + " " + detail::format_double(v.y()) +
                 " " + detail::format_double(v.z()));
  }

  bool has(const std::string& key) const {
    for (const auto& kv : entries_) {
      if (kv.first == key) return true;
    }
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& kv : entries_) {
      if (kv.first == key) return kv.second;
    }
    throw Error(ErrorCode::ConfigError, "missing key '" + key + "'");
  }
  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }
  double get_double(const std::string& key) const {
    return detail::parse_double(get(key), "key '" + key + "'");
  }
  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }
  long long get_int(const std::string& key) const {
    return detail::parse_int(get(key), "key '" + key + "'");
  }
  long long get_int_or(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }
  std::uint64_t get_uint(const std::string& key) const {
    const long long v = get_int(key);
    if (v < 0) {
      throw Error(ErrorCode::ConfigError, "key '" + key + "' must be non-negative");
    }
    return static_cast<std::uint64_t>(v);
  }
  bool get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error(ErrorCode::ConfigError, "key '" + key + "' must be a boolean");
  }
  Vec3 get_vec3(const std::string& key) const {
    std::istringstream ss(get(key));
    std::string a, b, c, extra;
    if (!(ss >> a >> b >> c) || (ss >> extra)) {
      throw Error(ErrorCode::ConfigError, "key '" + key + "' must be 3 numbers");
    }
    const std::string ctx = "key '" + key + "'";
    return Vec3(detail::parse_double(a, ctx), detail::parse_double(b, ctx),
                detail::parse_double(c, ctx));
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& kv : entries_) {
      out << kv.first << "=" << kv.second << "\n";
    }
    return out.str();
  }

  /// Stable content fingerprint (FNV-1a of the sorted serialization).
  std::uint64_t hash() const {
    std::vector<std::pair<std::string, std::string>> sorted = entries_;
    std::sort(sorted.begin(), sorted.end());
    std::string canon;
    for (const auto& kv : sorted) {
      canon += kv.first;
      canon += '=';
      canon += kv.second;
      canon += '\n';
    }
    return detail::fnv1a(canon);
  }

  static KeyValueDocument parse(const std::string& text,
                                const std::string& name = "<config>") {
    KeyValueDocument doc;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::string section;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']' || t.size() < 3) {
          throw Error(ErrorCode::ConfigError,
                      name + ":" + std::to_string(line_no) + ": malformed section header");
        }
        section = detail::trim(t.substr(1, t.size() - 2));
        if (section.empty()) {
          throw Error(ErrorCode::ConfigError,
                      name + ":" + std::to_string(line_no) + ": empty section name");
        }
        continue;
      }
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::ConfigError,
                    name + ":" + std::to_string(line_no) + ": expected key=value");
      }
      const std::string key = detail::trim(t.substr(0, eq));
      const std::string value = detail::trim(t.substr(eq + 1));
      if (key.empty()) {
        throw Error(ErrorCode::ConfigError,
                    name + ":" + std::to_string(line_no) + ": empty key");
      }
      doc.set(section.empty() ? key : section + "." + key, value);
    }
    return doc;
  }

  static KeyValueDocument parse_file(const std::string& path) {
    return parse(detail::read_text_file(path), path);
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Loads the tool configuration: explicit path first, then $POLECAL_CONFIG,
/// else empty (all defaults).
inline KeyValueDocument load_config(const std::string& cli_path = "") {
  if (!cli_path.empty()) return KeyValueDocument::parse_file(cli_path);
  if (const char* env = std::getenv("POLECAL_CONFIG")) {
    if (env[0] != '\0') return KeyValueDocument::parse_file(env);
  }
  return KeyValueDocument{};
}

// ---------------------------------------------------------------------------
// Scenario manifest

inline void transform_to_doc(KeyValueDocument& doc, const std::string& prefix,
                             const RigidTransform& t) {
  const Quat4 q = t.rotation.quaternion();
  doc.set(prefix + ".quaternion",
          detail::format_double(q[0]) + " " + detail::format_double(q[1]) + " " +
              detail::format_double(q[2]) + " " + detail::format_double(q[3]));
  doc.set_vec3(prefix + ".translation", t.translation);
}

inline RigidTransform transform_from_doc(const KeyValueDocument& doc,
                                         const std::string& prefix) {
  std::istringstream ss(doc.get(prefix + ".quaternion"));
  double w, x, y, z;
  if (!(ss >> w >> x >> y >> z)) {
    throw Error(ErrorCode::ConfigError,
                "key '" + prefix + ".quaternion' must be 4 numbers");
  }
  return RigidTransform{Rotation::from_quaternion(w, x, y, z),
                        doc.get_vec3(prefix + ".translation")};
}

/// Full description of a simulated scenario, enough to regenerate it and
/// to evaluate results against the ground-truth extrinsic.
inline KeyValueDocument scenario_to_manifest(const Scenario& s) {
  KeyValueDocument doc;
  doc.set("manifest.format", "polecal-scenario");
  doc.set_int("manifest.version", 1);
  doc.set_uint("scenario.seed", s.rng_seed);
  for (int i = 0; i < 2; ++i) {
    const std::string p = "lidar" + std::to_string(i);
    transform_to_doc(doc, p + ".pose", s.lidars[static_cast<std::size_t>(i)].lidar_pose);
  }
  for (int i = 0; i < 2; ++i) {
    const std::string p = "pole" + std::to_string(i);
    const PoleSpec& pole = s.poles[static_cast<std::size_t>(i)];
    doc.set_vec3(p + ".anchor", pole.anchor);
    doc.set_vec3(p + ".direction", pole.direction);
    doc.set_double(p + ".radius", pole.radius);
    doc.set_double(p + ".z_min", pole.z_min);
    doc.set_double(p + ".z_max", pole.z_max);
    doc.set_bool(p + ".reflective", pole.reflective);
  }
  std::string elev;
  for (std::size_t k = 0; k < s.model.channel_elevations.size(); ++k) {
    if (k) elev += " ";
    elev += detail::format_double(s.model.channel_elevations[k]);
  }
  doc.set("model.channel_elevations", elev);
  doc.set_double("model.azimuth_resolution", s.model.azimuth_resolution);
  doc.set_double("model.max_range", s.model.max_range);
  doc.set_double("model.noise_sigma", s.model.noise_sigma);
  doc.set_uint("clutter.count", s.clutter.count);
  doc.set_vec3("clutter.box_min", s.clutter.box_min);
  doc.set_vec3("clutter.box_max", s.clutter.box_max);
  transform_to_doc(doc, "ground_truth", s.ground_truth());
  return doc;
}

inline Scenario scenario_from_manifest(const KeyValueDocument& doc) {
  if (doc.get_or("manifest.format", "") != "polecal-scenario") {
    throw Error(ErrorCode::ConfigError, "not a scenario manifest");
  }
  Scenario s;
  s.rng_seed = doc.get_uint("scenario.seed");
  for (int i = 0; i < 2; ++i) {
    s.lidars[static_cast<std::size_t>(i)].lidar_pose =
        transform_from_doc(doc, "lidar" + std::to_string(i) + ".pose");
  }
  for (int i = 0; i < 2; ++i) {
    const std::string p = "pole" + std::to_string(i);
    PoleSpec& pole = s.poles[static_cast<std::size_t>(i)];
    pole.anchor = doc.get_vec3(p + ".anchor");
    pole.direction = doc.get_vec3(p + ".direction").normalized();
    pole.radius = doc.get_double(p + ".radius");
    pole.z_min = doc.get_double(p + ".z_min");
    pole.z_max = doc.get_double(p + ".z_max");
    pole.reflective = doc.get_bool_or(p + ".reflective", true);
  }
  s.model.channel_elevations.clear();
  {
    std::istringstream ss(doc.get("model.channel_elevations"));
    std::string tok;
    while (ss >> tok) {
      s.model.channel_elevations.push_back(
          detail::parse_double(tok, "key 'model.channel_elevations'"));
    }
  }
  s.model.azimuth_resolution = doc.get_double("model.azimuth_resolution");
  s.model.max_range = doc.get_double("model.max_range");
  s.model.noise_sigma = doc.get_double("model.noise_sigma");
  s.clutter.count = static_cast<std::size_t>(doc.get_uint("clutter.count"));
  s.clutter.box_min = doc.get_vec3("clutter.box_min");
  s.clutter.box_max = doc.get_vec3("clutter.box_max");
  s.validate();
  return s;
}

}  // namespace polecal

#endif  // POLECAL_IO_HPP
