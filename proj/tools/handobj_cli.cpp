// handobj: command-line front end for the hand-object geometry library.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "handobj/handobj.hpp"
#include "handobj/report.hpp"

using namespace handobj;

namespace {

struct Output {
  std::string path;  // empty: stdout

  void emit(const std::string& text) const {
    if (path.empty()) {
      std::cout << text;
    } else {
      write_text(path, text);
    }
  }
};

Json envelope(const std::string& command) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  return j;
}

HandAnnotation annotation_for(const std::string& path, const TriMesh& hand) {
  HandAnnotation a = load_annotation(path);
  a.validate(hand.num_vertices());
  return a;
}

// ---------------------------------------------------------------------------
// metrics

struct MetricsOptions {
  std::string hand, object, annotation, manifest, reference;
  double voxel = kDefaultVoxelSize;
  GraspParams grasp;
  int chamfer_samples = 2500;
  bool simulate = false;
  SimParams sim;
  Output out;
};

MetricsReport compute_metrics(const TriMesh& hand, const TriMesh& obj, const std::optional<HandAnnotation>& ann,
                              const std::optional<TriMesh>& reference, const MetricsOptions& o) {
  MetricsReport r;
  r.penetration_depth_mm = penetration_depth_mm(hand, obj);
  const auto iv = intersection_volume(hand, obj, o.voxel);
  r.intersection_volume_cm3 = iv.volume_cm3;
  r.hand_boundary_closed = iv.hand_closed;
  if (o.simulate) r.sim_displacement_mm = simulate_displacement(hand, obj, o.sim).displacement_mm;
  if (reference) {
    const auto a = sample_surface(obj, static_cast<std::size_t>(o.chamfer_samples), o.grasp.seed);
    const auto b = sample_surface(*reference, static_cast<std::size_t>(o.chamfer_samples), o.grasp.seed + 1);
    const double c = chamfer(a, b).value;
    r.chamfer = c;
    r.chamfer_x1000 = 1000.0 * c;
  }
  if (ann) {
    const auto q = evaluate_grasp(hand, obj, *ann, o.grasp);
    r.epsilon = q.epsilon;
    r.volume_v = q.volume_v;
    r.volume_v_std_error = q.volume_std_error;
    r.n_phalanges = q.n_phalanges;
    r.palm_contact = q.palm_contact;
    r.score_g = q.score_g;
  }
  return r;
}

ParamsEcho echo_for(const MetricsOptions& o) {
  ParamsEcho p;
  p.voxel_size_m = o.voxel;
  p.grasp = o.grasp;
  if (o.simulate) p.sim = o.sim;
  return p;
}

/// Arithmetic mean of every numeric field, over the records that carry it.
Json mean_of(const std::vector<Json>& reports) {
  std::map<std::string, std::pair<double, int>> acc;
  std::vector<std::string> order;
  for (const auto& r : reports) {
    for (auto it = r.begin(); it != r.end(); ++it) {
      if (!it.value().is_number()) continue;
      auto [pos, fresh] = acc.try_emplace(it.key(), 0.0, 0);
      if (fresh) order.push_back(it.key());
      pos->second.first += it.value().get<double>();
      pos->second.second += 1;
    }
  }
  Json mean;
  for (const auto& key : order) {
    const auto& [sum, n] = acc.at(key);
    mean[key] = round9(sum / n);
  }
  return mean;
}

int cmd_metrics(const MetricsOptions& o) {
  Json j = envelope("metrics");
  j["params"] = params_json(echo_for(o));
  std::optional<TriMesh> reference;
  if (!o.reference.empty()) reference = load_obj(o.reference);

  if (!o.manifest.empty()) {
    const auto records = load_manifest(o.manifest);
    Json items = Json::array();
    std::vector<Json> reports;
    for (const auto& rec : records) {
      try {
        const TriMesh hand = load_obj(rec.hand_path);
        const TriMesh obj = load_obj(rec.object_path);
        std::optional<HandAnnotation> ann;
        if (rec.annotation_path) ann = annotation_for(*rec.annotation_path, hand);
        reports.push_back(metrics_json(compute_metrics(hand, obj, ann, reference, o)));
        items.push_back(Json{{"id", rec.id}, {"metrics", reports.back()}});
      } catch (const Error& e) {
        throw Error(e.kind(), "record '" + rec.id + "': " + e.what());
      }
    }
    j["count"] = records.size();
    j["records"] = items;
    j["mean"] = mean_of(reports);
  } else {
    if (o.hand.empty() || o.object.empty()) {
      throw Error(ErrorKind::InvalidArgument, "metrics needs --hand and --object, or --manifest");
    }
    const TriMesh hand = load_obj(o.hand);
    const TriMesh obj = load_obj(o.object);
    std::optional<HandAnnotation> ann;
    if (!o.annotation.empty()) ann = annotation_for(o.annotation, hand);
    j["metrics"] = metrics_json(compute_metrics(hand, obj, ann, reference, o));
  }
  o.out.emit(dump(j));
  return 0;
}

// ---------------------------------------------------------------------------
// refine

struct RefineOptions {
  std::string hand, object, annotation, out_prefix = "refined", mode = "object_pose";
  RefineConfig config;
};

Json config_json(const RefineConfig& c) {
  return Json{{"mode", to_string(c.mode)},
              {"step", round9(c.step)},
              {"iterations", c.iterations},
              {"hand_laplacian_weight", round9(c.hand_laplacian_weight)},
              {"divergence_factor", round9(c.divergence_factor)}};
}

int cmd_refine(RefineOptions o) {
  o.config.mode = parse_refine_mode(o.mode);
  const TriMesh hand = load_obj(o.hand);
  const TriMesh obj = load_obj(o.object);
  const HandAnnotation ann = annotation_for(o.annotation, hand);

  Json j = envelope("refine");
  ParamsEcho echo;
  echo.contact = o.config.contact;
  j["params"] = params_json(echo);
  j["refine"] = config_json(o.config);
  const std::string trace_path = o.out_prefix + "_trace.json";
  try {
    const auto result = refine(hand, obj, ann, o.config);
    write_obj(o.out_prefix + "_object.obj", result.obj);
    if (o.config.moves_hand()) write_obj(o.out_prefix + "_hand.obj", result.hand);
    j["diverged"] = false;
    j["trace"] = trace_json(result.trace);
    write_text(trace_path, dump(j));
  } catch (const RefineDiverged& e) {
    j["diverged"] = true;
    j["error"] = e.what();
    j["trace"] = trace_json(e.trace());
    write_text(trace_path, dump(j));
    throw;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// regions

struct RegionsOptions {
  std::string manifest;
  double vicinity = kDefaultContactVicinity;
  double threshold = kDefaultRegionFrequency;
  Output out;
};

int cmd_regions(const RegionsOptions& o) {
  const auto records = load_manifest(o.manifest);
  std::vector<HandObjectPair> pairs;
  for (const auto& rec : records) {
    try {
      pairs.push_back({load_obj(rec.hand_path), load_obj(rec.object_path)});
    } catch (const Error& e) {
      throw Error(e.kind(), "record '" + rec.id + "': " + e.what());
    }
  }
  const auto regions = extract_contact_regions(pairs, o.vicinity, o.threshold);
  Json j = envelope("regions");
  j["params"] = Json{{"vicinity_m", round9(o.vicinity)}, {"freq_threshold", round9(o.threshold)}};
  j["n_pairs"] = pairs.size();
  j["regions"] = regions;
  o.out.emit(dump(j));
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string hand, object, trajectory;
  SimParams params;
  Output out;
};

int cmd_simulate(const SimulateOptions& o) {
  const TriMesh hand = o.hand.empty() ? TriMesh() : load_obj(o.hand);
  const TriMesh obj = load_obj(o.object);
  const auto r = simulate_displacement(hand, obj, o.params, !o.trajectory.empty());
  if (!o.trajectory.empty()) {
    std::string csv = "t,x,y,z\n";
    char line[128];
    for (const auto& s : r.trajectory) {
      std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g\n", s.t, s.com.x(), s.com.y(), s.com.z());
      csv += line;
    }
    write_text(o.trajectory, csv);
  }
  ParamsEcho echo;
  echo.sim = o.params;
  Json j = envelope("simulate");
  j["params"] = Json{{"sim", params_json(echo).at("sim")}};
  j["sim_displacement_mm"] = round9(r.displacement_mm);
  j["mass_kg"] = round9(r.mass.mass);
  j["initial_com_m"] = vec_json(r.initial.com);
  j["final_com_m"] = vec_json(r.final_state.com);
  j["steps"] = r.steps;
  j["hand_boundary_closed"] = r.hand_closed;
  o.out.emit(dump(j));
  return 0;
}

// ---------------------------------------------------------------------------
// icosphere, chamfer

int cmd_icosphere(int level, double radius, const Output& out) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  const TriMesh m = icosphere(level).scaled(radius, Vec3::Zero());
  out.emit(to_obj_string(m));
  return 0;
}

int cmd_chamfer(const std::string& a, const std::string& b, int samples, std::uint64_t seed, const Output& out) {
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "--samples must be positive");
  const auto pa = sample_surface(load_obj(a), static_cast<std::size_t>(samples), seed);
  const auto pb = sample_surface(load_obj(b), static_cast<std::size_t>(samples), seed + 1);
  const double c = chamfer(pa, pb).value;
  Json j = envelope("chamfer");
  j["params"] = Json{{"samples", samples}, {"seed", seed}};
  j["chamfer"] = round9(c);
  j["chamfer_x1000"] = round9(1000.0 * c);
  out.emit(dump(j));
  return 0;
}

void add_sim_flags(CLI::App* cmd, SimParams& p) {
  cmd->add_option("--gravity", p.gravity, "Gravity (m/s^2)")->capture_default_str();
  cmd->add_option("--duration", p.duration, "Simulated time (s)")->capture_default_str();
  cmd->add_option("--dt", p.dt, "Time step (s)")->capture_default_str();
  cmd->add_option("--stiffness", p.stiffness, "Penalty stiffness per contact vertex (N/m)")->capture_default_str();
  cmd->add_option("--damping", p.damping, "Penalty damping per contact vertex (N s/m)")->capture_default_str();
  cmd->add_option("--friction", p.friction, "Coulomb coefficient")->capture_default_str();
  cmd->add_option("--density", p.density, "Object density (kg/m^3)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physical plausibility metrics and refinement for hand-object meshes"};
  app.require_subcommand(1);

  MetricsOptions mo;
  auto* metrics = app.add_subcommand("metrics", "Penetration, intersection volume, grasp quality (single pair or batch)");
  metrics->add_option("--hand", mo.hand, "Hand OBJ");
  metrics->add_option("--object", mo.object, "Object OBJ");
  metrics->add_option("--annotation", mo.annotation, "Hand annotation JSON; enables grasp quality");
  metrics->add_option("--manifest", mo.manifest, "Newline-delimited JSON pair manifest (batch mode)");
  metrics->add_option("--reference", mo.reference, "Ground-truth object OBJ; enables Chamfer");
  metrics->add_option("--voxel", mo.voxel, "Voxel size (m)")->capture_default_str();
  metrics->add_option("--delta", mo.grasp.delta, "Contact distance threshold (m)")->capture_default_str();
  metrics->add_option("--mu", mo.grasp.mu, "Friction coefficient")->capture_default_str();
  metrics->add_option("--cone-edges", mo.grasp.cone_edges, "Friction cone edges")->capture_default_str();
  metrics->add_option("--epsilon-dirs", mo.grasp.n_dirs, "Sampled directions for epsilon")->capture_default_str();
  metrics->add_option("--volume-samples", mo.grasp.n_samples, "Monte Carlo samples for v")->capture_default_str();
  metrics->add_option("--chamfer-samples", mo.chamfer_samples, "Surface samples per mesh")->capture_default_str();
  metrics->add_option("--seed", mo.grasp.seed, "Random seed")->capture_default_str();
  metrics->add_flag("--simulate", mo.simulate, "Also run the drop simulation");
  add_sim_flags(metrics, mo.sim);
  metrics->add_option("--out", mo.out.path, "Output JSON (default stdout)");

  RefineOptions ro;
  auto* refine_cmd = app.add_subcommand("refine", "Gradient-descent refinement on the contact objective");
  refine_cmd->add_option("--hand", ro.hand, "Hand OBJ")->required();
  refine_cmd->add_option("--object", ro.object, "Object OBJ")->required();
  refine_cmd->add_option("--annotation", ro.annotation, "Hand annotation JSON")->required();
  refine_cmd->add_option("--lambda-r", ro.config.contact.lambda_r, "Repulsion weight")->capture_default_str();
  refine_cmd->add_option("--r", ro.config.contact.r, "Repulsion distance (m)")->capture_default_str();
  refine_cmd->add_option("--a", ro.config.contact.a, "Attraction distance (m)")->capture_default_str();
  refine_cmd->add_option("--steps", ro.config.iterations, "Iterations")->capture_default_str();
  refine_cmd->add_option("--step-size", ro.config.step, "Gradient step")->capture_default_str();
  refine_cmd->add_option("--mode", ro.mode, "object_pose | hand_vertices | both")->capture_default_str();
  refine_cmd->add_option("--laplacian-weight", ro.config.hand_laplacian_weight, "Hand Laplacian weight")
      ->capture_default_str();
  refine_cmd->add_option("--out-prefix", ro.out_prefix, "Prefix for <prefix>_object.obj and <prefix>_trace.json")
      ->capture_default_str();

  RegionsOptions rg;
  auto* regions = app.add_subcommand("regions", "Contact regions from a grasp corpus");
  regions->add_option("--manifest", rg.manifest, "Pair manifest")->required();
  regions->add_option("--vicinity", rg.vicinity, "Contact distance (m)")->capture_default_str();
  regions->add_option("--threshold", rg.threshold, "Minimum contact frequency")->capture_default_str();
  regions->add_option("--out", rg.out.path, "Output JSON (default stdout)");

  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "Drop the object onto a fixed hand");
  simulate->add_option("--hand", so.hand, "Hand OBJ (omit for free fall)");
  simulate->add_option("--object", so.object, "Object OBJ")->required();
  add_sim_flags(simulate, so.params);
  simulate->add_option("--trajectory", so.trajectory, "Write t,x,y,z CSV of the centre of mass");
  simulate->add_option("--out", so.out.path, "Output JSON (default stdout)");

  int level = 3;
  double radius = 1.0;
  Output ico_out;
  auto* ico = app.add_subcommand("icosphere", "Write a subdivided icosahedron as OBJ");
  ico->add_option("--level", level, "Subdivision level")->capture_default_str();
  ico->add_option("--radius", radius, "Radius")->capture_default_str();
  ico->add_option("--out", ico_out.path, "Output OBJ (default stdout)");

  std::string cham_a, cham_b;
  int cham_samples = 2500;
  std::uint64_t cham_seed = 0;
  Output cham_out;
  auto* cham = app.add_subcommand("chamfer", "Chamfer distance between surface samples of two meshes");
  cham->add_option("a", cham_a, "First OBJ")->required();
  cham->add_option("b", cham_b, "Second OBJ")->required();
  cham->add_option("--samples", cham_samples, "Samples per mesh")->capture_default_str();
  cham->add_option("--seed", cham_seed, "Random seed")->capture_default_str();
  cham->add_option("--out", cham_out.path, "Output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*metrics) return cmd_metrics(mo);
    if (*refine_cmd) return cmd_refine(ro);
    if (*regions) return cmd_regions(rg);
    if (*simulate) return cmd_simulate(so);
    if (*ico) return cmd_icosphere(level, radius, ico_out);
    if (*cham) return cmd_chamfer(cham_a, cham_b, cham_samples, cham_seed, cham_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  }
  return 2;
}
