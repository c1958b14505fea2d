#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "handobj/mesh.hpp"

namespace handobj {

namespace detail {

inline int parse_obj_index(const std::string& token, std::size_t vertex_count, std::size_t line_no) {
  // "7", "7/1", "7//3", "7/1/3"; negative indices are relative to the end.
  const std::string head = token.substr(0, token.find('/'));
  std::size_t used = 0;
  long long idx = 0;
  try {
    idx = std::stoll(head, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != head.size()) {
    throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  const long long n = static_cast<long long>(vertex_count);
  const long long zero_based = idx > 0 ? idx - 1 : n + idx;
  if (idx == 0 || zero_based < 0 || zero_based >= n) {
    throw Error(ErrorKind::InvalidArgument,
                "line " + std::to_string(line_no) + ": face index " + std::to_string(idx) + " out of range (" +
                    std::to_string(n) + " vertices)");
  }
  return static_cast<int>(zero_based);
}

}  // namespace detail

/// Parses ASCII Wavefront OBJ text. Only `v` and `f` records are used;
/// polygons are fan-triangulated as (0, k, k+1).
inline TriMesh parse_obj(std::istream& in) {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed vertex record");
      }
      vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ss >> tok) poly.push_back(detail::parse_obj_index(tok, vertices.size(), line_no));
      if (poly.size() < 3) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": face with fewer than 3 vertices");
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  return TriMesh(std::move(vertices), std::move(faces));
}

inline TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open OBJ file '" + path + "'");
  try {
    return parse_obj(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

inline std::string to_obj_string(const TriMesh& mesh) {
  std::string out;
  char buf[128];
  for (const auto& v : mesh.vertices()) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& [a, b, c] : mesh.faces()) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", a + 1, b + 1, c + 1);
    out += buf;
  }
  return out;
}

inline void write_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write OBJ file '" + path + "'");
  out << to_obj_string(mesh);
  if (!out) throw Error(ErrorKind::Io, "failed writing OBJ file '" + path + "'");
}

}  // namespace handobj
