#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rodhom/cross_section.hpp"
#include "rodhom/effective_stiffness.hpp"
#include "rodhom/fem2d.hpp"
#include "rodhom/material_config.hpp"
#include "rodhom/probe3d.hpp"
#include "rodhom/report.hpp"
#include "rodhom/rod_model.hpp"

namespace rodhom::cli {

struct RunConfig {
  std::string command;

  std::string mesh;
  std::string primitive;
  int resolution = 2000;
  double radius = 1.0;
  double width = 1.0;
  double height = 1.0;
  std::vector<double> semi_axes{2.0, 1.0};
  std::vector<double> radii{0.5, 1.0};
  double side = 1.0;
  double thickness = 0.25;

  std::string material;
  double tol = 1e-10;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out = "-";

  double length = 1.0;
  int intervals = 64;
  int max_iterations = 100000;
  std::optional<double> twist;
  std::vector<double> end_rotation;
  std::vector<double> end_moment;
  double perturb = 0.0;

  std::vector<double> h_ladder{0.2, 0.1, 0.05};
  std::vector<double> strain{0.5, 0.0, 0.0};
  std::size_t max_unknowns = 1'000'000;
};

namespace detail {

inline std::vector<double> primitive_params(const RunConfig& c, PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::disc: return {c.radius};
    case PrimitiveKind::rectangle: return {c.width, c.height};
    case PrimitiveKind::ellipse: return c.semi_axes;
    case PrimitiveKind::annulus: return c.radii;
    case PrimitiveKind::l_shape: return {c.side, c.thickness};
  }
  return {};
}

inline TriMesh2D build_mesh(const RunConfig& c) {
  if (!c.mesh.empty() && !c.primitive.empty()) {
    throw Error(ErrorCode::invalid_parameter, "give either --mesh or --primitive, not both");
  }
  if (!c.mesh.empty()) return load_mesh(c.mesh);
  if (c.primitive.empty()) throw Error(ErrorCode::invalid_parameter, "a mesh source (--mesh or --primitive) is required");
  const PrimitiveKind kind = parse_primitive_kind(c.primitive);
  return build_primitive(kind, primitive_params(c, kind), c.resolution);
}

/// The resolved configuration as it enters the hash. The output path and the
/// thread count do not change the numbers and are left out.
inline Json config_json(const RunConfig& c, const MaterialSpec& material) {
  Json j;
  j["command"] = c.command;
  if (!c.mesh.empty()) {
    j["mesh"] = c.mesh;
  } else {
    const PrimitiveKind kind = parse_primitive_kind(c.primitive);
    j["primitive"] = c.primitive;
    j["dimensions"] = primitive_params(c, kind);
    j["resolution"] = c.resolution;
  }
  j["material"] = material.canonical();
  j["tol"] = c.tol;
  j["seed"] = c.seed;
  if (c.command == "rod") {
    j["length"] = c.length;
    j["intervals"] = c.intervals;
    j["max_iterations"] = c.max_iterations;
    if (c.twist) j["twist"] = *c.twist;
    if (!c.end_rotation.empty()) j["end_rotation"] = c.end_rotation;
    if (!c.end_moment.empty()) j["end_moment"] = c.end_moment;
    j["perturb"] = c.perturb;
  }
  if (c.command == "probe") {
    j["length"] = c.length;
    j["h_ladder"] = c.h_ladder;
    j["strain"] = c.strain;
    j["max_unknowns"] = c.max_unknowns;
  }
  return j;
}

inline Vector3d vec3(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) throw Error(ErrorCode::invalid_parameter, std::string(what) + " needs three values");
  return {v[0], v[1], v[2]};
}

inline Json run_rod(const RunConfig& c, const TriMesh2D& mesh, const MaterialSpec& material, unsigned threads) {
  const auto stiff = effective_matrix(mesh, material.quadratic(), {c.tol, threads});
  RodBoundary bc;
  const int specified = (c.twist ? 1 : 0) + (!c.end_rotation.empty() ? 1 : 0) + (!c.end_moment.empty() ? 1 : 0);
  if (specified > 1) {
    throw Error(ErrorCode::invalid_parameter, "--twist, --end-rotation and --end-moment are exclusive");
  }
  if (!c.end_moment.empty()) {
    bc.end = EndCondition::moment;
    bc.end_moment = vec3(c.end_moment, "--end-moment");
  } else if (!c.end_rotation.empty()) {
    bc.end_frame = quat_exp(vec3(c.end_rotation, "--end-rotation"));
  } else {
    bc.end_frame = quat_exp(Vector3d(c.twist.value_or(0.0), 0.0, 0.0));
  }
  RodOptions opts;
  opts.intervals = c.intervals;
  opts.max_iterations = c.max_iterations;
  if (c.perturb < 0) throw Error(ErrorCode::invalid_parameter, "--perturb must be non-negative");
  if (c.perturb > 0) {
    if (c.intervals < 16) throw Error(ErrorCode::invalid_parameter, "rod minimization needs N >= 16");
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> nd;
    auto nodes = rodhom::detail::default_guess(bc, c.length, c.intervals).nodes();
    const std::size_t last = bc.end == EndCondition::moment ? nodes.size() : nodes.size() - 1;
    for (std::size_t i = 1; i < last; ++i) {
      const Vector3d d(nd(rng), nd(rng), nd(rng));
      nodes[i] = (quat_exp(c.perturb * d) * nodes[i]).normalized();
    }
    opts.initial = FrameCurve(c.length, std::move(nodes));
  }
  const RodResult r = minimize_rod(RodStiffness::uniform(stiff), bc, c.length, opts);
  Json j;
  j["Q0"] = to_json_flat(stiff.Q0);
  j["rod"] = rod_json(r);
  return j;
}

inline Json run_probe_command(const RunConfig& c, const TriMesh2D& mesh, const MaterialSpec& material,
                              unsigned threads) {
  ProbeOptions opts;
  opts.ladder = c.h_ladder;
  opts.length = c.length;
  opts.tol = c.tol;
  opts.threads = threads;
  opts.max_unknowns = c.max_unknowns;
  const Vector3d coords = vec3(c.strain, "--strain");
  return probe_json(run_probe(mesh, material.nonlinear(), axial_from_coords(coords), opts));
}

inline Json execute(const RunConfig& c) {
  if (!(c.tol > 0)) throw Error(ErrorCode::invalid_parameter, "--tol must be positive");
  if (!(c.length > 0)) throw Error(ErrorCode::invalid_parameter, "--length must be positive");
  const MaterialSpec material = c.material.empty() ? MaterialSpec{} : load_material(c.material);
  const TriMesh2D raw = build_mesh(c);
  auto [mesh, geo] = normalize_axes(raw);
  const unsigned threads = resolve_threads(c.threads);

  std::ostringstream mesh_text;
  write_mesh(mesh_text, raw);
  const Json config = config_json(c, material);

  Json report;
  report["command"] = c.command;
  report["version"] = version();
  report["config_hash"] = fnv1a_hex(config.dump() + "\n" + mesh_text.str());
  report["config"] = config;
  report["mesh_stats"] = mesh_stats_json(raw);

  if (c.command == "section") {
    torsion_constant(mesh, geo, c.tol);
    report["section"] = section_json(geo);
  } else if (c.command == "stiffness") {
    torsion_constant(mesh, geo, c.tol);
    const auto s = effective_matrix(mesh, material.quadratic(), {c.tol, threads});
    const Json sj = stiffness_json(s);
    for (const auto& [k, v] : sj.items()) report[k] = v;
    report["mu2"] = geo.mu2;
    report["mu3"] = geo.mu3;
    report["torsion_constant"] = geo.torsion_constant;
  } else if (c.command == "rod") {
    const Json rj = run_rod(c, mesh, material, threads);
    for (const auto& [k, v] : rj.items()) report[k] = v;
  } else if (c.command == "probe") {
    report["probe"] = run_probe_command(c, mesh, material, threads);
  }
  return report;
}

inline void write_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << error_json(code, message).dump(2) << '\n';
}

}  // namespace detail

/// Parses the command line (and an optional --config file) and runs one
/// subcommand. Returns 0 on success, 1 on numerical failure, 2 on bad input.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Homogenized rod stiffness, rod minimization and 3D probes", "rodhom"};
  app.set_config("--config", "", "Configuration file (key = value)");
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--mesh", c.mesh, "Cross-section mesh file");
  app.add_option("--primitive", c.primitive, "disc | rectangle | ellipse | annulus | L-shape");
  app.add_option("--resolution", c.resolution, "Target triangle count for primitives");
  app.add_option("--radius", c.radius, "Disc radius");
  app.add_option("--width", c.width, "Rectangle width (x2)");
  app.add_option("--height", c.height, "Rectangle height (x3)");
  app.add_option("--semi-axes", c.semi_axes, "Ellipse semi-axes")->expected(2);
  app.add_option("--radii", c.radii, "Annulus inner and outer radius")->expected(2);
  app.add_option("--side", c.side, "L-shape outer side");
  app.add_option("--thickness", c.thickness, "L-shape arm thickness");
  app.add_option("--material", c.material, "Material config file (default: isotropic, lambda 0, mu 1)");
  app.add_option("--tol", c.tol, "Relative solver tolerance");
  app.add_option("--seed", c.seed, "Random seed");
  app.add_option("--threads", c.threads, "Worker threads (0: all cores)");
  app.add_option("--out", c.out, "Report path, - for stdout");
  app.add_option("--length", c.length, "Rod length");
  app.add_option("--intervals", c.intervals, "Rod intervals");
  app.add_option("--max-iterations", c.max_iterations, "Rod iteration cap");
  app.add_option("--twist", c.twist, "Clamped end twisted about e1 by this angle");
  app.add_option("--end-rotation", c.end_rotation, "Clamped end rotation vector")->expected(3);
  app.add_option("--end-moment", c.end_moment, "Free end loaded by this moment")->expected(3);
  app.add_option("--perturb", c.perturb, "Amplitude of a seeded perturbation of the initial rod guess");
  app.add_option("--h-ladder", c.h_ladder, "Thickness ladder for the probe")->expected(1, 32);
  app.add_option("--strain", c.strain, "Probe strain (A12, A13, A23)")->expected(3);
  app.add_option("--max-unknowns", c.max_unknowns, "Probe size limit");

  for (const char* name : {"section", "stiffness", "rod", "probe"}) {
    app.add_subcommand(name)->callback([&c, name] { c.command = name; });
  }
  app.get_subcommand("section")->description("Section geometry and torsion constant");
  app.get_subcommand("stiffness")->description("Effective stiffness M, Q0 and a_min");
  app.get_subcommand("rod")->description("Minimize the rod energy");
  app.get_subcommand("probe")->description("Recovery-sequence ladder in 3D");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    const bool config_missing = dynamic_cast<const CLI::ConfigError*>(&e) != nullptr;
    detail::write_error(err, config_missing ? "invalid-input" : "invalid-parameter", e.what());
    return 2;
  }

  try {
    const std::string text = detail::execute(c).dump(2) + "\n";
    if (c.out.empty() || c.out == "-") {
      out << text;
    } else {
      std::ofstream f(c.out, std::ios::binary);
      if (!(f << text)) throw Error(ErrorCode::invalid_input, "cannot write report to " + c.out);
    }
    return 0;
  } catch (const Error& e) {
    detail::write_error(err, to_string(e.code()), e.what());
    return is_input_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    detail::write_error(err, "internal", e.what());
    return 1;
  }
}

}  // namespace rodhom::cli
