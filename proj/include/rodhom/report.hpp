#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "json.hpp"

#include "rodhom/cross_section.hpp"
#include "rodhom/effective_stiffness.hpp"
#include "rodhom/probe3d.hpp"
#include "rodhom/rod_model.hpp"

#ifndef RODHOM_VERSION
#define RODHOM_VERSION "0.0.0"
#endif

namespace rodhom {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view version() { return RODHOM_VERSION; }

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <typename Derived>
Json to_json_flat(const Eigen::MatrixBase<Derived>& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

inline Json mesh_stats_json(const TriMesh2D& mesh) {
  Json j;
  j["vertices"] = mesh.num_vertices();
  j["triangles"] = mesh.num_triangles();
  j["min_angle_deg"] = mesh.min_angle_deg();
  j["warnings"] = mesh.warnings();
  return j;
}

inline Json section_json(const SectionGeometry& g) {
  Json j;
  j["area"] = g.area;
  j["mu2"] = g.mu2;
  j["mu3"] = g.mu3;
  j["torsion_constant"] = g.torsion_constant;
  j["diameter"] = g.diameter;
  j["translation"] = to_json_flat(g.translation.transpose());
  j["rotation_angle"] = g.rotation_angle;
  return j;
}

inline Json stiffness_json(const EffectiveStiffness& s) {
  Json j;
  j["M"] = to_json_flat(s.M);
  j["Q0"] = to_json_flat(s.Q0);
  j["a_min"] = to_json_flat(s.a_min_coeffs.transpose());
  j["solver_residuals"] = s.residuals;
  j["solver_iterations"] = s.iterations;
  return j;
}

inline Json rod_json(const RodResult& r) {
  Json j;
  j["energy"] = r.energy;
  j["elastic"] = r.elastic;
  j["iterations"] = r.iterations;
  j["gradient_norm"] = r.gradient_norm;
  j["stop_reason"] = r.stop_reason;
  j["monotone"] = r.monotone();
  j["length"] = r.frame.length();
  Json nodes = Json::array();
  for (const auto& q : r.frame.nodes()) nodes.push_back({q.w(), q.x(), q.y(), q.z()});
  j["frames_wxyz"] = std::move(nodes);
  Json strain = Json::array();
  for (const auto& v : strain_of(r.frame).axial) strain.push_back(to_json_flat(v.transpose()));
  j["strain_axial"] = std::move(strain);
  return j;
}

inline Json probe_json(const ProbeReport& r) {
  Json j;
  j["strain_axial"] = to_json_flat(r.strain_axial.transpose());
  j["a"] = r.a;
  j["target"] = r.target;
  j["gaps_decreasing"] = r.gaps_decreasing();
  j["min_energy_ratio"] = r.min_energy_ratio();
  j["rigidity_constant"] = r.rigidity_constant;
  Json levels = Json::array();
  for (const auto& l : r.levels) {
    Json e;
    e["h"] = l.h;
    e["cells"] = l.cells;
    e["unknowns"] = l.unknowns;
    e["energy"] = l.energy;
    e["relative_gap"] = l.relative_gap;
    e["inverted_cells"] = l.inverted_cells;
    e["rigidity"] = {{"scaled_distance", l.rigidity.scaled_distance},
                     {"deviation", l.rigidity.deviation},
                     {"ratio", l.rigidity.ratio}};
    e["gradient_deviation"] = l.gradient_deviation;
    e["strain_distance"] = l.strain_distance;
    e["griso_residual"] = l.griso_residual;
    levels.push_back(std::move(e));
  }
  j["levels"] = std::move(levels);
  return j;
}

inline Json error_json(std::string_view code, std::string_view message) {
  Json j;
  j["error"] = {{"code", code}, {"message", message}};
  j["version"] = version();
  return j;
}

}  // namespace rodhom
