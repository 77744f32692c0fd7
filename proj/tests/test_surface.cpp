#include <isoshell/surface.hpp>

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace isoshell;

namespace {

const UnitCell kCell(2 * EIGEN_PI, 2 * EIGEN_PI, 16, 16);

PeriodicSurface flat_plane() {
  return PeriodicSurface({1, 0, 0}, {0, 1, 0}, VectorField::zero(kCell));
}

PeriodicSurface translation_graph() {
  return PeriodicSurface::graph(sample(Expr::parse("cos(u)+cos(v)"), kCell));
}

PeriodicSurface skew_corrugation() {
  VectorField xt(sample(Expr::parse("0.05*sin(u+v)"), kCell),
                 sample(Expr::parse("0.04*cos(v)"), kCell),
                 sample(Expr::parse("0.2*cos(u)+0.1*sin(u+v)"), kCell));
  return PeriodicSurface({1, 0.1, 0}, {-0.05, 1.1, 0}, xt);
}

Eigen::Matrix3d test_rotation() {
  return Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 0.5).normalized()).toRotationMatrix();
}

}  // namespace

TEST_CASE("surface validation", "[surface]") {
  REQUIRE_THROWS_AS(PeriodicSurface({1, 0, 0}, {1, 0, 0}, VectorField::zero(kCell)),
                    ValidationError);
  auto I = translation_graph().effective_metric();
  REQUIRE(I.isApprox(Eigen::Matrix2d::Identity(), 1e-14));
}

TEST_CASE("darboux operator on the flat plane", "[surface]") {
  DarbouxOperator op(flat_plane());

  // Constant rotation fields are annihilated exactly.
  auto wconst = VectorField::constant(kCell, {0.3, -1.2, 0.8});
  REQUIRE(op.apply(wconst).max_abs() == 0.0);

  // D w = w_v ^ e1 - w_u ^ e2, checked against direct differentiation.
  std::mt19937 rng(31);
  auto w = oracle::random_band_vector(kCell, rng);
  auto wu = diff(w, Dir::U), wv = diff(w, Dir::V);
  VectorField expect = VectorField::zero(kCell);
  for (int i = 0; i < kCell.N1; ++i)
    for (int j = 0; j < kCell.N2; ++j) {
      Eigen::Vector3d e = wv.at(i, j).cross(Eigen::Vector3d(1, 0, 0)) -
                          wu.at(i, j).cross(Eigen::Vector3d(0, 1, 0));
      for (int c = 0; c < 3; ++c) expect.comp(c)(i, j) = e(c);
    }
  REQUIRE((op.apply(w) - expect).max_abs() <= 1e-11 * std::max(1.0, w.max_abs()));
}

TEST_CASE("constant fields are annihilated on any surface", "[surface]") {
  DarbouxOperator op(skew_corrugation());
  REQUIRE(op.apply(VectorField::constant(kCell, {1, 2, 3})).max_abs() <= 1e-12);
}

TEST_CASE("Lemma 5 self-adjointness defect", "[surface]") {
  const PeriodicSurface surfaces[] = {flat_plane(), translation_graph(), skew_corrugation()};
  for (const auto& x : surfaces) {
    DarbouxOperator op(x);
    std::mt19937 rng(37);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
      auto omega = oracle::random_band_vector(kCell, rng);
      auto w = oracle::random_band_vector(kCell, rng);
      auto Dw = op.apply(w), Domega = op.apply(omega);
      const double scale = norm(omega) * norm(w) *
                           std::max({norm(Dw) / norm(w), norm(Domega) / norm(omega), 1e-12});
      worst = std::max(worst, darboux_defect(op, omega, w) / scale);
      if (trial == 0) REQUIRE(darboux_defect(op, w, w) == 0.0);
    }
    REQUIRE(worst <= 1e-10);
  }
}

TEST_CASE("rotation field recovered from the classical translation mode", "[surface]") {
  // xdot = (-int a'^2, int b'^2, a - b) for a = b = cos; its gradients are
  // periodic and known in closed form.
  auto x = translation_graph();
  VectorField xdot_u(sample(Expr::parse("0-sin(u)^2"), kCell), sample(Expr::parse("0"), kCell),
                     sample(Expr::parse("0-sin(u)"), kCell));
  VectorField xdot_v(sample(Expr::parse("0"), kCell), sample(Expr::parse("sin(v)^2"), kCell),
                     sample(Expr::parse("sin(v)"), kCell));
  auto w = rotation_from_deflection(x, xdot_u, xdot_v);
  DarbouxOperator op(x);
  REQUIRE(norm(op.apply(w)) <= 1e-8 * std::max(1.0, norm(w)));

  // Support velocities against their closed forms.
  const auto [p1dot, p2dot] = support_velocities(x, w);
  REQUIRE((p1dot - Eigen::Vector3d(-0.5, 0, 0)).norm() <= 1e-10);
  REQUIRE((p2dot - Eigen::Vector3d(0, 0.5, 0)).norm() <= 1e-10);
  auto E = strain_from_velocities(x, p1dot, p2dot);
  REQUIRE_THAT(E.E11, Catch::Matchers::WithinAbs(-0.5, 1e-10));
  REQUIRE_THAT(E.E22, Catch::Matchers::WithinAbs(0.5, 1e-10));
}

TEST_CASE("periodic modes of the embedded translation graph", "[surface]") {
  DarbouxOperator op(translation_graph());
  auto modes = periodic_modes(op);
  REQUIRE(modes.trivial_dim == 3);
  int carriers = 0;
  for (const auto& m : modes.modes) carriers += m.silent ? 0 : 1;
  REQUIRE(carriers == 1);

  // Cross-module consistency with the Monge analysis after mode-norm
  // alignment.
  MongeOperator mop(sample(Expr::parse("cos(u)+cos(v)"), kCell));
  auto graph_kernel = periodic_kernel(mop);
  REQUIRE_FALSE(graph_kernel.modes.empty());
  const Eigen::Matrix2d Eg = graph_kernel.modes[0].E.matrix();
  const Eigen::Matrix2d Es = modes.modes[0].E.matrix();
  const double s = (Eg.cwiseProduct(Es)).sum() / (Es.cwiseProduct(Es)).sum();
  REQUIRE((Eg - s * Es).norm() <= 1e-6 * Eg.norm());
}

TEST_CASE("flat plane carries no strain", "[surface]") {
  DarbouxOperator op(flat_plane());
  auto modes = periodic_modes(op);
  // The discrete kernel is large (any in-plane curl field is the rotation
  // field of a vertical deflection of the plane) but every mode is silent.
  for (const auto& m : modes.modes) REQUIRE(m.silent);
}

TEST_CASE("frame indifference of mode strains", "[surface]") {
  auto x = translation_graph();
  auto xr = x.rotated(test_rotation());
  auto ma = periodic_modes(DarbouxOperator(x));
  auto mb = periodic_modes(DarbouxOperator(xr));
  REQUIRE_FALSE(ma.modes.empty());
  REQUIRE_FALSE(mb.modes.empty());
  const Eigen::Matrix2d Ea = ma.modes[0].E.matrix();
  Eigen::Matrix2d Eb = mb.modes[0].E.matrix();
  // Modes are defined up to sign; strains are compared up to it.
  if ((Ea - Eb).norm() > (Ea + Eb).norm()) Eb = -Eb;
  REQUIRE((Ea - Eb).norm() <= 1e-10 * std::max(1.0, Ea.norm()));
}

TEST_CASE("mode family validation", "[surface]") {
  // Rigid rotations of one surface form an exactly isometric family.
  auto base = skew_corrugation();
  std::vector<double> ts;
  std::vector<PeriodicSurface> surfs;
  for (int k = 0; k < 3; ++k) {
    ts.push_back(0.1 * k);
    surfs.push_back(
        base.rotated(Eigen::AngleAxisd(0.2 * k, Eigen::Vector3d::UnitZ()).toRotationMatrix()));
  }
  REQUIRE_NOTHROW(ModeFamily::from_surfaces(ts, surfs));

  // Changing the corrugation amplitude breaks isometry.
  VectorField xt = base.corrugation();
  xt *= 1.05;
  surfs[2] = PeriodicSurface(base.p1(), base.p2(), xt);
  REQUIRE_THROWS_AS(ModeFamily::from_surfaces(ts, surfs), ValidationError);

  REQUIRE_THROWS_AS(
      ModeFamily::from_supports({{0.0, {1, 0, 0}, {0, 1, 0}}, {0.0, {1, 0, 0}, {0, 1, 0}}}),
      ValidationError);
}

namespace {

ModeFamily trig_family(double t0, double t1, int n) {
  // p1 = (cos t, 0, 0), p2 = (0, sin t, 0): c^2 + s^2 is constant, so this
  // is a legitimate abstract calibration input with I = diag(c^2, s^2).
  std::vector<FamilySample> s;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + (t1 - t0) * i / (n - 1);
    s.push_back({t, {std::cos(t), 0, 0}, {0, std::sin(t), 0}});
  }
  return ModeFamily::from_supports(std::move(s));
}

double calibration_error(int n, DiffScheme scheme, int margin = 0) {
  auto rows = family_calibration(trig_family(0.3, 1.1, n), scheme);
  double worst = 0;
  for (int i = margin; i < static_cast<int>(rows.size()) - margin; ++i) {
    const auto& r = rows[i];
    Eigen::Matrix2d exact;
    exact << -std::cos(r.t) * std::sin(r.t), 0, 0, std::sin(r.t) * std::cos(r.t);
    worst = std::max(worst, (r.E - exact).norm());
  }
  return worst;
}

}  // namespace

TEST_CASE("family calibration against the analytic derivative", "[surface]") {
  auto rows = family_calibration(trig_family(0.3, 1.1, 21));
  for (const auto& r : rows) {
    REQUIRE_THAT(r.I(0, 0), Catch::Matchers::WithinAbs(std::cos(r.t) * std::cos(r.t), 1e-14));
    // E = diag(c cdot, s sdot); det E < 0: hyperbolic with nu = 1.
    REQUIRE(r.det_sign == -1);
    REQUIRE(r.type == PdeType::Hyperbolic);
    REQUIRE_THAT(r.nu, Catch::Matchers::WithinAbs(1.0, 1e-6));
  }

  // Observed convergence order of ||2 E_fd - Idot|| is at least 1.9.
  const double e1 = calibration_error(11, DiffScheme::Central);
  const double e2 = calibration_error(21, DiffScheme::Central);
  const double order = std::log2(e1 / e2);
  REQUIRE(order >= 1.9);

  // Richardson beats central differences on uniform interior samples.
  REQUIRE(calibration_error(21, DiffScheme::Richardson, 2) <
          calibration_error(21, DiffScheme::Central, 2));
}

TEST_CASE("calibration needs at least three samples", "[surface]") {
  REQUIRE_THROWS_AS(family_calibration(trig_family(0.3, 0.4, 2)), ValidationError);
}

TEST_CASE("euclidean invariance of calibration", "[surface]") {
  auto fam = trig_family(0.3, 1.1, 11);
  const Eigen::Matrix3d Q = test_rotation();
  std::vector<FamilySample> rotated;
  for (const auto& s : fam.samples()) rotated.push_back({s.t, Q * s.p1, Q * s.p2});
  auto a = family_calibration(fam);
  auto b = family_calibration(ModeFamily::from_supports(std::move(rotated)));
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE((a[i].I - b[i].I).norm() <= 1e-10);
    REQUIRE((a[i].E - b[i].E).norm() <= 1e-10);
  }
}
