// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rodhom/rodhom.hpp"

using namespace rodhom;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Section {
  TriMesh2D mesh;
  SectionGeometry geo;
};

Section section(PrimitiveKind kind, std::vector<double> params, int res, bool torsion = true) {
  auto [m, g] = normalize_axes(build_primitive(kind, std::move(params), res));
  if (torsion) torsion_constant(m, g);
  return {std::move(m), g};
}

double rel(double value, double oracle) { return std::abs(value - oracle) / std::abs(oracle); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double golden(const std::function<double(double)>& f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int k = 0; k < 300 && b - a > 1e-14 * (1 + std::abs(a)); ++k) {
    if (fc < fd) {
      b = d; d = c; fd = fc; c = b - r * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd; d = a + r * (b - a); fd = f(d);
    }
  }
  return f(0.5 * (a + b));
}

// Young's modulus as the minimum of Q(diag(1, s, t)) over lateral strains.
double young_oracle(const QuadraticLaw& q) {
  auto qs = [&](double s, double t) {
    Matrix3d g = Matrix3d::Zero();
    g(0, 0) = 1;
    g(1, 1) = s;
    g(2, 2) = t;
    return q(Vector3d::Zero(), g);
  };
  return golden([&](double s) { return golden([&](double t) { return qs(s, t); }, -2, 2); }, -2, 2);
}

// Torsion constant of the unit square from the classical series.
double square_torsion_series() {
  double sum = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double n = 2 * k + 1;
    sum += std::tanh(n * kPi / 2) / std::pow(n, 5);
  }
  return 1.0 / 3.0 - 64.0 / std::pow(kPi, 5) * sum;
}

Vector3d random_vector(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd;
  return scale * Vector3d(nd(rng), nd(rng), nd(rng));
}

// ---------------------------------------------------------------------------

void section_geometry(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto disc = section(PrimitiveKind::disc, {1.0}, 10000, false);
  const auto square = section(PrimitiveKind::rectangle, {1.0, 1.0}, 10000, false);
  const double t = seconds_since(t0);
  const double e2 = rel(disc.geo.mu2, kPi / 4), e3 = rel(disc.geo.mu3, kPi / 4);
  const double s2 = rel(square.geo.mu2, 1.0 / 12), s3 = rel(square.geo.mu3, 1.0 / 12);
  o.check(disc.mesh.num_triangles() >= 10000, "disc has 1e4 elements");
  o.check(std::max(e2, e3) <= 1e-3, "disc mu within 1e-3");
  o.check(std::max(s2, s3) <= 1e-6, "square mu within 1e-6");
  o.check(t < 5.0, "runtime < 5 s");
  o.detail << "disc rel err " << std::max(e2, e3) << " (" << disc.mesh.num_triangles() << " tris), square rel err "
           << std::max(s2, s3) << ", " << t << " s";
}

void torsion(Outcome& o) {
  struct Case {
    const char* name;
    PrimitiveKind kind;
    std::vector<double> params;
    double oracle;
  };
  const std::vector<Case> cases{{"disc", PrimitiveKind::disc, {1.0}, kPi / 2},
                                {"square", PrimitiveKind::rectangle, {1.0, 1.0}, square_torsion_series()},
                                {"ellipse", PrimitiveKind::ellipse, {2.0, 1.0}, 8 * kPi / 5}};
  for (const auto& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = section(c.kind, c.params, 10000);
    const double t = seconds_since(t0);
    const double e = rel(s.geo.torsion_constant, c.oracle);
    o.check(e <= 0.01, std::string(c.name) + " within 1%");
    o.check(t < 30.0, std::string(c.name) + " runtime < 30 s");
    o.detail << c.name << " " << s.geo.torsion_constant << " vs " << c.oracle << " (" << t << " s); ";
  }
}

void projection(Outcome& o) {
  const auto mesh = section(PrimitiveKind::ellipse, {1.5, 1.0}, 4000, false).mesh;
  VectorField2D u(mesh.num_vertices());
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const auto& p = mesh.vertices()[v];
    u[v] = {std::sin(2 * p.x()) + p.y() * p.y(), p.x() * p.y() - std::exp(p.y())};
  }
  const auto ue = to_element_field(mesh, u);
  const auto r = project_field(mesh, ue);
  const auto rr = project_field(mesh, r.projected);
  ElementField2D diff = rr.projected;
  for (std::size_t t = 0; t < diff.size(); ++t) {
    for (int i = 0; i < 3; ++i) diff[t][i] -= r.projected[t][i];
  }
  const double pu = std::sqrt(l2_norm_sq(mesh, r.projected));
  const double idem = std::sqrt(l2_norm_sq(mesh, diff)) / pu;

  const P1Geometry geo(mesh);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  double worst_inner = 0.0;
  for (int k = 0; k < 20; ++k) {
    VectorXd psi(mesh.num_vertices());
    for (auto& v : psi) v = nd(rng);
    const auto g = p1_gradient(mesh, geo, psi);
    worst_inner = std::max(worst_inner, std::abs(l2_inner(mesh, r.projected, g)) / (pu * std::sqrt(l2_norm_sq(mesh, g))));
  }
  const double total = l2_norm_sq(mesh, ue);
  const double pyth = rel(l2_norm_sq(mesh, r.projected) + l2_norm_sq(mesh, r.grad_phi), total);
  o.check(idem <= 1e-8, "idempotence");
  o.check(worst_inner <= 1e-8, "orthogonality to 20 gradients");
  o.check(pyth <= 1e-6, "Pythagoras");
  o.detail << "idempotence " << idem << ", orthogonality " << worst_inner << ", Pythagoras " << pyth;
}

void isotropic_stiffness(Outcome& o) {
  const auto s = section(PrimitiveKind::disc, {1.0}, 10000);
  const auto law = make_isotropic_quadratic(1.0, 1.0);
  const auto st = effective_matrix(s.mesh, law);
  const double young = young_oracle(law), shear = 1.0;
  double off = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i != j) off = std::max(off, std::abs(st.M(i, j)));
    }
  }
  off /= st.M.diagonal().maxCoeff();
  const double b2 = rel(st.M(1, 1), young * s.geo.mu2), b3 = rel(st.M(2, 2), young * s.geo.mu3);
  const double tor = rel(st.M(3, 3), shear * s.geo.torsion_constant);
  const auto bounds = check_stiffness_bounds(st, s.geo, law.eta1(), law.eta2(), 1000);
  o.check(off <= 1e-6, "M diagonal");
  o.check(std::max(b2, b3) <= 0.01, "bending = E mu");
  o.check(tor <= 0.01, "torsion = mu C");
  o.check(st.a_min_coeffs.norm() <= 1e-8, "a_min = 0");
  o.check(bounds.all(), "bounds on 1000 random loads");
  o.detail << "off-diagonal " << off << ", bending err " << std::max(b2, b3) << ", torsion err " << tor
           << ", |a_min| " << st.a_min_coeffs.norm() << ", fitted C_omega " << bounds.fitted_c_omega;
}

void laminate(Outcome& o) {
  // Phases with Poisson coupling, so the corrector is nontrivial.
  const auto qa = make_isotropic_quadratic(1.0, 1.0);
  const auto qb = make_isotropic_quadratic(8.0, 4.0);
  const auto law = make_laminate(qa, qb, Axis::x2, 0.125, 0.5);
  const auto coarse = section(PrimitiveKind::rectangle, {1.0, 1.0}, 2048, false);
  const auto fine = section(PrimitiveKind::rectangle, {1.0, 1.0}, 4 * 2048, false);
  const double q = effective_matrix(coarse.mesh, law).Q0(0, 0);
  const double qf = effective_matrix(fine.mesh, law).Q0(0, 0);
  const double ea = young_oracle(qa) * coarse.geo.mu2, eb = young_oracle(qb) * coarse.geo.mu2;
  const double harmonic = 2 * ea * eb / (ea + eb), arithmetic = 0.5 * (ea + eb);
  o.check(q >= harmonic && q <= arithmetic, "within phase-mean bracket");
  o.check(rel(q, qf) <= 0.02, "matches 4x refined oracle within 2%");
  o.detail << "Q0_11 " << q << " in [" << harmonic << ", " << arithmetic << "], refined " << qf << " (rel "
           << rel(q, qf) << ")";
}

void schur(Outcome& o) {
  const auto s = section(PrimitiveKind::l_shape, {1.0, 0.3}, 800, false);
  const auto st = effective_matrix(s.mesh, make_laminate(make_isotropic_quadratic(0, 1), make_isotropic_quadratic(2, 2),
                                                         Axis::x2, 0.3, 0.5));
  std::mt19937_64 rng(21);
  double worst = 0.0, worst_lin = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Matrix3d A = hat(random_vector(rng));
    const auto l = StrainLoad::from_skew(A);
    auto q = [&](double a) {
      StrainLoad la = l;
      la.a = a;
      return q_eval(st, la);
    };
    const double bound = 10 * (1 + std::abs(a_min_eval(st, A)));
    const double oracle = golden(q, -bound, bound);
    worst = std::max(worst, std::abs(q0_eval(st, A) - oracle) / std::max(1.0, oracle));

    const Matrix3d A2 = hat(random_vector(rng));
    const double al = 0.7, be = -1.3;
    const double lhs = a_min_eval(st, (al * A + be * A2).eval());
    const double rhs = al * a_min_eval(st, A) + be * a_min_eval(st, A2);
    worst_lin = std::max(worst_lin, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  o.check(worst <= 1e-9, "q0 equals golden-section minimum");
  o.check(worst_lin <= 1e-12, "a_min superposition");
  o.check(st.a_min_coeffs.norm() > 1e-6, "nontrivial a_min");
  o.detail << "golden-section err " << worst << ", superposition err " << worst_lin << ", |a_min coeffs| "
           << st.a_min_coeffs.norm();
}

void frame_ode(Outcome& o) {
  const double kappa = 1.7, length = 3.0;
  const auto f = frame_reconstruct(StrainCurve::constant(length, 1000, {0, 0, kappa}));
  double rod_err = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    rod_err = std::max(rod_err, (f.rotation(i) - rodrigues(Vector3d(0, 0, kappa * length * i / 1000.0))).cwiseAbs().maxCoeff());
  }
  std::mt19937_64 rng(2);
  StrainCurve a{1000.0, std::vector<Vector3d>(1000000)};
  for (auto& v : a.axial) v = random_vector(rng, 2.0);
  const double drift = frame_reconstruct(a).orthogonality_defect();

  StrainCurve b{2.5, std::vector<Vector3d>(200)};
  for (auto& v : b.axial) v = random_vector(rng, 10.0);
  const auto back = strain_of(frame_reconstruct(b, quat_exp({1, 2, 3})));
  double round = 0.0;
  for (int i = 0; i < b.intervals(); ++i) round = std::max(round, (back.axial[i] - b.axial[i]).norm());
  o.check(rod_err <= 1e-10, "Rodrigues closed form");
  o.check(drift <= 1e-9, "orthogonality drift");
  o.check(round <= 1e-10, "round trip");
  o.detail << "Rodrigues err " << rod_err << ", drift over 1e6 steps " << drift << ", round trip " << round;
}

void rod_minimization(Outcome& o) {
  // Torsion of an isotropic disc rod clamped at both ends, one end turned by theta about e1.
  const auto s = section(PrimitiveKind::disc, {1.0}, 2000);
  const auto st = effective_matrix(s.mesh, make_isotropic_quadratic(1.0, 1.0));
  const double length = 2.0, theta = 1.2, k = st.Q0(2, 2);
  RodBoundary bc;
  bc.end_frame = quat_exp({theta, 0, 0});
  RodOptions opt;
  opt.intervals = 64;
  std::mt19937_64 rng(6);
  auto nodes = detail::default_guess(bc, length, 64).nodes();
  for (std::size_t i = 1; i + 1 < nodes.size(); ++i) nodes[i] = nodes[i] * quat_exp(random_vector(rng, 0.2));
  opt.initial = FrameCurve(length, nodes);
  const auto r = minimize_rod(RodStiffness::uniform(st), bc, length, opt);
  const double oracle = k * theta * theta / length;
  double strain_dev = 0.0;
  for (const auto& v : strain_of(r.frame).axial) strain_dev = std::max(strain_dev, (v - Vector3d(theta / length, 0, 0)).norm());
  o.check(rel(r.energy, oracle) <= 1e-4, "energy within 1e-4");
  o.check(r.monotone(), "monotone descent");
  o.check(strain_dev <= 1e-3, "constant strain");
  o.detail << "energy " << r.energy << " vs " << oracle << " (rel " << rel(r.energy, oracle) << "), "
           << r.iterations << " iterations, strain deviation " << strain_dev;
}

void griso(Outcome& o) {
  auto mesh = std::make_shared<const TriMesh2D>(section(PrimitiveKind::disc, {1.0}, 200, false).mesh);
  auto grid = [&](double h) { return std::make_shared<const TensorGrid>(mesh, 1.5, 16, h); };
  const GrisoConstants c = fit_griso_constants(grid(0.1), 100, 2024);

  double residual = 0.0;
  bool estimates = true;
  std::mt19937_64 rng(77);
  for (int k = 0; k < 50; ++k) {
    const Field3D u = random_smooth_field(grid(0.1), rng);
    const auto p = griso_decompose(u);
    residual = std::max(residual, griso_residual(u, p));
    const auto n = griso_norms(u, p);
    estimates = estimates && n.rod <= c.rod * n.strain && n.remainder <= c.remainder * n.strain;
  }
  for (double h : {0.2, 0.05}) {
    std::mt19937_64 r2(static_cast<std::uint64_t>(1000 * h));
    for (int k = 0; k < 20; ++k) {
      const Field3D u = random_smooth_field(grid(h), r2);
      const auto n = griso_norms(u, griso_decompose(u));
      estimates = estimates && n.rod <= c.rod * n.strain && n.remainder <= c.remainder * n.strain;
    }
  }

  const Vector3d t(0.3, -1.0, 2.0);
  const Matrix3d w = hat(Vector3d(0.7, -0.2, 0.5));
  const auto g = grid(0.1);
  const Field3D rigid = Field3D::sample(g, [&](double x1, double x2, double x3) {
    return Vector3d(t + w * Vector3d(x1, 0.1 * x2, 0.1 * x3));
  });
  const auto nr = griso_norms(rigid, griso_decompose(rigid));
  const double rigid_norm = std::max({nr.strain, nr.rod, nr.remainder});
  o.check(residual <= 1e-10, "reconstruction residual");
  o.check(rigid_norm <= 1e-10, "rigid motions");
  o.check(estimates, "frozen-constant estimates");
  o.detail << "residual " << residual << ", rigid norms " << rigid_norm << ", frozen constants (" << c.rod << ", "
           << c.remainder << ")";
}

void gamma_probe(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mesh = section(PrimitiveKind::disc, {1.0}, 2000, false).mesh;
  ProbeOptions opt;
  opt.ladder = {0.2, 0.1, 0.05};
  opt.max_unknowns = 1'000'000;
  const auto rep = run_probe(mesh, make_isotropic(1.0, 1.0), Vector3d(0, 0, -1), opt);
  const double t = seconds_since(t0);
  o.check(rep.gaps_decreasing(), "strictly decreasing gap");
  o.check(rep.levels.back().relative_gap <= 0.1, "final gap <= 10%");
  o.check(rep.min_energy_ratio() >= 0.85, "energy >= 0.85 L Q0");
  o.check(t < 300.0, "runtime < 5 min");
  o.detail << "target " << rep.target << ", gaps";
  for (const auto& l : rep.levels) o.detail << " " << l.relative_gap;
  o.detail << ", min ratio " << rep.min_energy_ratio() << ", max unknowns " << rep.levels.back().unknowns << ", "
           << t << " s";
}

void finite_h(Outcome& o) {
  const auto s = section(PrimitiveKind::disc, {1.0}, 120, false);
  const auto q = make_isotropic_quadratic(1.0, 1.0);
  const auto limit = effective_matrix(s.mesh, q, {1e-11, 0});
  const LawFamily fam = [q](double) { return q; };
  double previous = 1e300;
  bool decreasing = true;
  Matrix4d k01;
  o.detail << "gaps";
  for (double h : {0.2, 0.1, 0.05}) {
    const Matrix4d k = finite_h_matrix(s.mesh, fam, h);
    if (h == 0.1) k01 = k;
    const double gap = (limit.M - k).norm() / limit.M.norm();
    decreasing = decreasing && gap < previous;
    previous = gap;
    o.detail << " " << gap;
  }
  // Frozen constant: eta2, from Cauchy-Schwarz on the form and K(m) <= eta2 |m|^2.
  const double c = q.eta2();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const StrainLoad l1{nd(rng), nd(rng), nd(rng), nd(rng)};
    const StrainLoad l2{nd(rng), nd(rng), nd(rng), nd(rng)};
    const StrainLoad d = StrainLoad::from_coords(l1.coords() - l2.coords());
    const double lhs = std::abs(l1.coords().dot(k01 * l1.coords()) - l2.coords().dot(k01 * l2.coords()));
    const double rhs = c * std::sqrt(load_norm_sq(d, s.geo, 1.0)) *
                       (std::sqrt(load_norm_sq(l1, s.geo, 1.0)) + std::sqrt(load_norm_sq(l2, s.geo, 1.0)));
    worst = std::max(worst, lhs / rhs);
  }
  o.check(decreasing, "decreasing gap");
  o.check(worst <= 1.0 + 1e-10, "Lipschitz with frozen constant");
  o.detail << ", Lipschitz ratio " << worst << " (C = " << c << ")";
}

void material_axioms(Outcome& o) {
  const auto good = check_admissible(make_isotropic(1.0, 1.0), 1000);
  const NonlinearLaw broken([](const Vector3d&, const Matrix3d& f) { return (f - Matrix3d::Identity()).squaredNorm(); },
                            make_isotropic_quadratic(0.0, 0.5), 1.0, 1.0, 0.25, "|F-I|^2");
  const auto bad = check_admissible(broken, 1000);
  o.check(good.all_passed(), "isotropic passes W1-W4");
  o.check(!bad["W1"].passed, "broken law fails W1");
  for (const auto& a : good.axioms) o.detail << a.name << (a.passed ? " ok " : " FAIL ");
  o.detail << "; broken W1 worst " << bad["W1"].worst;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"section geometry", section_geometry},
      {"torsion constant", torsion},
      {"projection properties", projection},
      {"isotropic disc stiffness", isotropic_stiffness},
      {"laminate bending bracket", laminate},
      {"Schur consistency", schur},
      {"frame ODE", frame_ode},
      {"rod minimization", rod_minimization},
      {"Griso decomposition", griso},
      {"Gamma probe ladder", gamma_probe},
      {"finite-h self-consistency", finite_h},
      {"material axioms", material_axioms},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    std::printf("%s %2zu %-28s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, seconds_since(t0),
                o.detail.str().c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
