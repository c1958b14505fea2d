#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "handobj/grasp.hpp"
#include "handobj/losses.hpp"
#include "handobj/metrics.hpp"
#include "handobj/refine.hpp"
#include "handobj/sim.hpp"
#include "handobj/spatial.hpp"

namespace handobj {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Rounds to 9 significant digits so reports print stably.
inline double round9(double x) {
  if (!std::isfinite(x)) return x;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return std::strtod(buf, nullptr);
}

inline Json vec_json(const Vec3& v) { return Json::array({round9(v.x()), round9(v.y()), round9(v.z())}); }

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Annotation file: {"regions": [[...] x6], "palm": [...], "phalanges": [[...] x16]}

inline HandAnnotation annotation_from_json(const Json& j) {
  auto index_list = [](const Json& arr, const std::string& what) {
    if (!arr.is_array()) throw Error(ErrorKind::Parse, "annotation: '" + what + "' must be an array of indices");
    std::vector<int> out;
    for (const auto& v : arr) {
      if (!v.is_number_integer()) throw Error(ErrorKind::Parse, "annotation: '" + what + "' holds a non-integer");
      out.push_back(v.get<int>());
    }
    return out;
  };
  auto index_lists = [&](const Json& arr, const std::string& what) {
    if (!arr.is_array()) throw Error(ErrorKind::Parse, "annotation: '" + what + "' must be an array of arrays");
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(index_list(arr[i], what + "[" + std::to_string(i) + "]"));
    return out;
  };
  if (!j.is_object() || !j.contains("regions")) throw Error(ErrorKind::Parse, "annotation: missing 'regions'");
  HandAnnotation a;
  a.regions = index_lists(j.at("regions"), "regions");
  if (j.contains("palm")) a.palm = index_list(j.at("palm"), "palm");
  if (j.contains("phalanges")) a.phalanges = index_lists(j.at("phalanges"), "phalanges");
  return a;
}

inline Json annotation_to_json(const HandAnnotation& a) {
  return Json{{"regions", a.regions}, {"palm", a.palm}, {"phalanges", a.phalanges}};
}

inline HandAnnotation load_annotation(const std::string& path) {
  try {
    return annotation_from_json(read_json(path));
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()).find(path) == 0 ? e.what() : path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Pair manifest: newline-delimited JSON records
// {"id": ..., "hand_path": ..., "object_path": ..., "annotation_path": ...}

struct PairRecord {
  std::string id;
  std::string hand_path;
  std::string object_path;
  std::optional<std::string> annotation_path;
};

/// Relative paths are resolved against the manifest's directory.
inline std::vector<PairRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open manifest '" + path + "'");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_absolute() ? fp : base / fp).string();
  };
  std::vector<PairRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto field = [&](const char* key) {
      if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": missing string field '" + key + "'");
      }
      return j.at(key).get<std::string>();
    };
    PairRecord r;
    r.id = j.contains("id") ? (j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump())
                            : std::to_string(records.size());
    r.hand_path = resolve(field("hand_path"));
    r.object_path = resolve(field("object_path"));
    if (j.contains("annotation_path") && !j.at("annotation_path").is_null()) {
      r.annotation_path = resolve(field("annotation_path"));
    }
    if (!ids.insert(r.id).second) {
      throw Error(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": duplicate record id '" + r.id + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Reports

/// Every tunable echoed into reports so numbers can be traced to settings.
struct ParamsEcho {
  ContactParams contact;
  double mu_e = kEdgeLossWeight;
  double mu_l = kLaplacianLossWeight;
  double voxel_size_m = kDefaultVoxelSize;
  double vicinity_m = kDefaultContactVicinity;
  double freq_threshold = kDefaultRegionFrequency;
  GraspParams grasp;
  std::optional<SimParams> sim;
};

inline Json params_json(const ParamsEcho& p) {
  Json j;
  j["lambda_r"] = round9(p.contact.lambda_r);
  j["r_m"] = round9(p.contact.r);
  j["a_m"] = round9(p.contact.a);
  j["mu_c"] = round9(p.contact.mu_c);
  j["mu_e"] = round9(p.mu_e);
  j["mu_l"] = round9(p.mu_l);
  j["voxel_size_m"] = round9(p.voxel_size_m);
  j["vicinity_m"] = round9(p.vicinity_m);
  j["freq_threshold"] = round9(p.freq_threshold);
  j["contact_delta_m"] = round9(p.grasp.delta);
  j["friction_mu"] = round9(p.grasp.mu);
  j["cone_edges"] = p.grasp.cone_edges;
  j["epsilon_directions"] = p.grasp.n_dirs;
  j["epsilon_refine_iters"] = p.grasp.refine_iters;
  j["volume_samples"] = p.grasp.n_samples;
  j["seed"] = p.grasp.seed;
  if (p.sim) {
    j["sim"] = Json{{"gravity", round9(p.sim->gravity)},     {"duration_s", round9(p.sim->duration)},
                    {"dt_s", round9(p.sim->dt)},             {"stiffness", round9(p.sim->stiffness)},
                    {"damping", round9(p.sim->damping)},     {"friction", round9(p.sim->friction)},
                    {"density", round9(p.sim->density)}};
  }
  return j;
}

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_floating_point_v<T>) {
    j[key] = round9(*v);
  } else {
    j[key] = *v;
  }
}

inline Json metrics_json(const MetricsReport& r) {
  Json j;
  j["penetration_depth_mm"] = round9(r.penetration_depth_mm);
  j["intersection_volume_cm3"] = round9(r.intersection_volume_cm3);
  put_optional(j, "sim_displacement_mm", r.sim_displacement_mm);
  put_optional(j, "chamfer", r.chamfer);
  put_optional(j, "chamfer_x1000", r.chamfer_x1000);
  put_optional(j, "epsilon", r.epsilon);
  put_optional(j, "volume_v", r.volume_v);
  put_optional(j, "volume_v_std_error", r.volume_v_std_error);
  put_optional(j, "n_phalanges", r.n_phalanges);
  put_optional(j, "palm_contact", r.palm_contact);
  put_optional(j, "score_G", r.score_g);
  j["hand_boundary_closed"] = r.hand_boundary_closed;
  return j;
}

inline Json trace_json(const RefineTrace& trace) {
  Json steps = Json::array();
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    Json gaps = Json::array();
    for (double g : s.region_gaps) gaps.push_back(round9(g));
    steps.push_back(Json{{"iteration", i},
                         {"loss", round9(s.loss)},
                         {"repulsion", round9(s.repulsion)},
                         {"attraction", round9(s.attraction)},
                         {"penetration_depth_mm", round9(s.penetration_depth_mm)},
                         {"region_gaps_m", gaps}});
  }
  return Json{{"translation_m", vec_json(trace.translation)},
              {"rotation_axis_angle", vec_json(trace.rotation)},
              {"steps", steps}};
}

/// Occupancy as [value, run length] pairs in x-fastest order.
inline Json voxel_grid_json(const VoxelGrid& grid) {
  Json runs = Json::array();
  for (std::size_t i = 0; i < grid.occupancy.size();) {
    std::size_t j = i;
    while (j < grid.occupancy.size() && grid.occupancy[j] == grid.occupancy[i]) ++j;
    runs.push_back(Json::array({grid.occupancy[i] ? 1 : 0, j - i}));
    i = j;
  }
  return Json{{"origin", vec_json(grid.origin)},
              {"h", round9(grid.h)},
              {"dims", grid.dims},
              {"occupied", grid.count()},
              {"occupancy_rle", runs}};
}

inline VoxelGrid voxel_grid_from_json(const Json& j) {
  VoxelGrid g;
  const auto o = j.at("origin");
  g.origin = Vec3(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>());
  g.h = j.at("h").get<double>();
  g.dims = j.at("dims").get<std::array<int, 3>>();
  for (const auto& run : j.at("occupancy_rle")) {
    g.occupancy.insert(g.occupancy.end(), run.at(1).get<std::size_t>(), run.at(0).get<int>() != 0);
  }
  if (g.occupancy.size() != static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2]) {
    throw Error(ErrorKind::Parse, "voxel grid: occupancy length does not match dims");
  }
  return g;
}

}  // namespace handobj
