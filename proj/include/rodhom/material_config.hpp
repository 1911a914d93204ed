#pragma once

// Plain-text material configuration.
//
//   # comment
//   kind = laminate          # isotropic | laminate | checkerboard
//   direction = x2           # laminate only: x1 | x2 | x3
//   period = 0.25
//   fraction = 0.5           # laminate only, volume fraction of phase a
//   [phase_a]
//   lambda = 0
//   mu = 1
//   [end]
//   [phase_b]
//   lambda = 0
//   mu = 2
//   [end]
//
// An isotropic file has `lambda` and `mu` at top level. Phases are isotropic.

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "rodhom/error.hpp"
#include "rodhom/material.hpp"

namespace rodhom {

struct IsotropicParams {
  double lambda = 0.0;
  double mu = 1.0;
};

struct MaterialSpec {
  std::string kind = "isotropic";
  IsotropicParams phase_a;
  IsotropicParams phase_b;
  Axis direction = Axis::x2;
  double period = 1.0;
  double fraction = 0.5;

  QuadraticLaw quadratic() const {
    const QuadraticLaw a = make_isotropic_quadratic(phase_a.lambda, phase_a.mu);
    if (kind == "isotropic") return a;
    const QuadraticLaw b = make_isotropic_quadratic(phase_b.lambda, phase_b.mu);
    if (kind == "laminate") return make_laminate(a, b, direction, period, fraction);
    return make_checkerboard(a, b, period);
  }

  /// Nonlinear counterpart; checkerboards have no nonlinear version.
  NonlinearLaw nonlinear() const {
    const NonlinearLaw a = make_isotropic(phase_a.lambda, phase_a.mu);
    if (kind == "isotropic") return a;
    if (kind == "laminate") {
      return make_laminate(a, make_isotropic(phase_b.lambda, phase_b.mu), direction, period, fraction);
    }
    throw Error(ErrorCode::unsupported_material, "no nonlinear density for kind " + kind);
  }

  /// Canonical text form, also used for hashing.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "kind=" << kind << ";a=" << phase_a.lambda << "," << phase_a.mu;
    if (kind != "isotropic") {
      os << ";b=" << phase_b.lambda << "," << phase_b.mu << ";period=" << period;
      if (kind == "laminate") {
        os << ";direction=x" << (static_cast<int>(direction) + 1) << ";fraction=" << fraction;
      }
    }
    return os.str();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& value, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::format, "line " + std::to_string(line) + ": expected a number, got '" + value + "'");
  }
  return v;
}

}  // namespace detail

inline MaterialSpec parse_material(std::istream& in) {
  MaterialSpec spec;
  std::map<std::string, bool> seen;
  std::string block;  // "", "phase_a" or "phase_b"
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    if (text.front() == '[') {
      if (text == "[phase_a]" || text == "[phase_b]") {
        if (!block.empty()) throw Error(ErrorCode::format, where + "nested phase block");
        block = text.substr(1, text.size() - 2);
        if (seen[block]) throw Error(ErrorCode::format, where + "duplicate block " + block);
        seen[block] = true;
      } else if (text == "[end]") {
        if (block.empty()) throw Error(ErrorCode::format, where + "[end] without open block");
        block.clear();
      } else {
        throw Error(ErrorCode::format, where + "unknown block " + text);
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::format, where + "expected key = value");
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    const std::string qualified = block.empty() ? key : block + "." + key;
    if (seen[qualified]) throw Error(ErrorCode::format, where + "duplicate key " + qualified);
    seen[qualified] = true;

    if (!block.empty()) {
      IsotropicParams& p = block == "phase_a" ? spec.phase_a : spec.phase_b;
      if (key == "lambda") p.lambda = detail::parse_number(value, line);
      else if (key == "mu") p.mu = detail::parse_number(value, line);
      else throw Error(ErrorCode::format, where + "unknown phase key " + key);
    } else if (key == "kind") {
      if (value != "isotropic" && value != "laminate" && value != "checkerboard") {
        throw Error(ErrorCode::format, where + "unknown kind " + value);
      }
      spec.kind = value;
    } else if (key == "lambda") {
      spec.phase_a.lambda = detail::parse_number(value, line);
    } else if (key == "mu") {
      spec.phase_a.mu = detail::parse_number(value, line);
    } else if (key == "direction") {
      try {
        spec.direction = parse_axis(value);
      } catch (const Error& e) {
        throw Error(ErrorCode::format, where + e.what());
      }
    } else if (key == "period") {
      spec.period = detail::parse_number(value, line);
    } else if (key == "fraction") {
      spec.fraction = detail::parse_number(value, line);
    } else {
      throw Error(ErrorCode::format, where + "unknown key " + key);
    }
  }
  if (!block.empty()) throw Error(ErrorCode::format, "unterminated block " + block);
  const bool composite = spec.kind != "isotropic";
  if (composite && (!seen["phase_a"] || !seen["phase_b"])) {
    throw Error(ErrorCode::format, "kind " + spec.kind + " needs [phase_a] and [phase_b] blocks");
  }
  if (!composite && (seen["phase_a"] || seen["phase_b"])) {
    throw Error(ErrorCode::format, "isotropic material takes lambda and mu at top level");
  }
  // Validate eagerly so configuration errors surface before any solve.
  (void)spec.quadratic();
  return spec;
}

inline MaterialSpec load_material(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_input, "cannot open material file " + path);
  return parse_material(in);
}

}  // namespace rodhom
