#include <isoshell/mesh.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace isoshell;

namespace {

PeriodicMesh flat_square() {
  std::vector<MeshVertex> verts = {{Eigen::Vector3d::Zero(), {0.0, 0.0}}};
  std::vector<std::vector<FaceCorner>> faces = {
      {{0, {0, 0}}, {0, {1, 0}}, {0, {1, 1}}, {0, {0, 1}}}};
  return PeriodicMesh({1, 0, 0}, {0, 1, 0}, std::move(verts), std::move(faces));
}

// Two coplanar strips tiling the torus; the single hinge line is x = 1/2
// (plus its wrap), with edge direction y.
PeriodicMesh strip_pair() {
  std::vector<MeshVertex> verts = {{Eigen::Vector3d::Zero(), {0.0, 0.0}},
                                   {{0.5, 0, 0}, {0.5, 0.0}}};
  std::vector<std::vector<FaceCorner>> faces = {
      {{0, {0, 0}}, {1, {0, 0}}, {1, {0, 1}}, {0, {0, 1}}},
      {{1, {0, 0}}, {0, {1, 0}}, {0, {1, 1}}, {1, {0, 1}}}};
  return PeriodicMesh({1, 0, 0}, {0, 1, 0}, std::move(verts), std::move(faces));
}

const MiuraParams kMiura{1.0, 1.0, 1.3};
const EggboxParams kEggbox{1.0, 1.0, 1.2};

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& a) {
  Eigen::Matrix3d M;
  M << 0, a.z(), -a.y(), -a.z(), 0, a.x(), a.y(), -a.x(), 0;  // M v = v ^ a
  return M;
}

// Fold-angle kinematics oracle: per-face rigid-motion fit of the central
// difference of vertex trajectories through the fold family, at unit
// parameter velocity. Independent of the constraint-matrix path.
std::vector<Eigen::Vector3d> fold_oracle(const std::function<PeriodicMesh(double)>& gen, double t,
                                         double dt) {
  const PeriodicMesh m0 = gen(t - dt), mid = gen(t), m1 = gen(t + dt);
  std::vector<Eigen::Vector3d> w(mid.num_faces());
  for (int f = 0; f < mid.num_faces(); ++f) {
    const int k = static_cast<int>(mid.faces()[f].size());
    Eigen::MatrixXd A(3 * k, 6);
    Eigen::VectorXd b(3 * k);
    for (int c = 0; c < k; ++c) {
      A.block<3, 3>(3 * c, 0) = cross_matrix(mid.corner_position(f, c));
      A.block<3, 3>(3 * c, 3) = Eigen::Matrix3d::Identity();
      b.segment<3>(3 * c) = (m1.corner_position(f, c) - m0.corner_position(f, c)) / (2 * dt);
    }
    w[f] = A.colPivHouseholderQr().solve(b).head<3>();
  }
  return w;
}

std::vector<Eigen::Vector3d> remove_constant(std::vector<Eigen::Vector3d> w) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& x : w) mean += x;
  mean /= static_cast<double>(w.size());
  for (auto& x : w) x -= mean;
  return w;
}

double stacked_dot(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
  return s;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("miura cell validates with the torus counts", "[mesh]") {
  auto mesh = miura_mesh(kMiura, 0.7);
  REQUIRE(mesh.num_faces() == 4);
  REQUIRE(mesh.vertices().size() == 4);
  // 4 quads on the torus: 16 sides pair into 8 edges (V - E + F = 0).
  REQUIRE(mesh.edges().size() == 8);
}

TEST_CASE("mesh file round trip", "[mesh]") {
  auto mesh = miura_mesh(kMiura, 0.7);
  const auto path = temp_file("isoshell_miura_roundtrip.json");
  mesh.save(path.string());
  auto back = PeriodicMesh::load(path.string());
  REQUIRE(back.num_faces() == 4);
  REQUIRE((back.p1() - mesh.p1()).norm() <= 1e-15);
  for (int f = 0; f < 4; ++f)
    for (int k = 0; k < 4; ++k)
      REQUIRE((back.corner_position(f, k) - mesh.corner_position(f, k)).norm() <= 1e-15);
  std::filesystem::remove(path);
}

TEST_CASE("mesh validation errors", "[mesh]") {
  SECTION("non-planar face is rejected by name") {
    std::vector<MeshVertex> verts = {{Eigen::Vector3d::Zero(), {0.0, 0.0}},
                                     {{0.5, 0, 0}, {0.5, 0.0}},
                                     {{0.5, 0.5, 0.3}, {0.5, 0.5}},
                                     {{0, 0.5, 0}, {0.0, 0.5}}};
    std::vector<std::vector<FaceCorner>> faces = {
        {{0, {0, 0}}, {1, {0, 0}}, {2, {0, 0}}, {3, {0, 0}}},
        {{1, {0, 0}}, {0, {1, 0}}, {3, {1, 0}}, {2, {0, 0}}},
        {{3, {0, 0}}, {2, {0, 0}}, {1, {0, 1}}, {0, {0, 1}}},
        {{2, {0, 0}}, {3, {1, 0}}, {0, {1, 1}}, {1, {0, 1}}}};
    try {
      PeriodicMesh({1, 0, 0}, {0, 1, 0}, std::move(verts), std::move(faces));
      FAIL("expected planarity error");
    } catch (const ValidationError& e) {
      REQUIRE_THAT(std::string(e.what()), Catch::Matchers::ContainsSubstring("face 0"));
      REQUIRE_THAT(std::string(e.what()), Catch::Matchers::ContainsSubstring("planar"));
    }
  }

  SECTION("non-manifold edges are rejected") {
    std::vector<MeshVertex> verts = {{Eigen::Vector3d::Zero(), {0.0, 0.0}}};
    std::vector<std::vector<FaceCorner>> faces = {
        {{0, {0, 0}}, {0, {1, 0}}, {0, {1, 1}}, {0, {0, 1}}},
        {{0, {0, 0}}, {0, {1, 0}}, {0, {1, 1}}, {0, {0, 1}}}};
    REQUIRE_THROWS_WITH(PeriodicMesh({1, 0, 0}, {0, 1, 0}, std::move(verts), std::move(faces)),
                        Catch::Matchers::ContainsSubstring("non-manifold"));
  }

  SECTION("open meshes do not tile the torus") {
    std::vector<MeshVertex> verts = {{Eigen::Vector3d::Zero(), {0.0, 0.0}},
                                     {{1, 0, 0}, {0.5, 0.0}},
                                     {{0, 1, 0}, {0.0, 0.5}}};
    std::vector<std::vector<FaceCorner>> faces = {{{0, {0, 0}}, {1, {0, 0}}, {2, {0, 0}}}};
    REQUIRE_THROWS_WITH(PeriodicMesh({3, 0, 0}, {0, 3, 0}, std::move(verts), std::move(faces)),
                        Catch::Matchers::ContainsSubstring("torus"));
  }

  SECTION("malformed files") {
    const auto path = temp_file("isoshell_bad_mesh.json");
    std::ofstream(path) << "{\"version\": 1, \"p1\": [1,0,0]}";
    REQUIRE_THROWS_AS(PeriodicMesh::load(path.string()), ValidationError);
    std::ofstream(path) << "not json";
    REQUIRE_THROWS_AS(PeriodicMesh::load(path.string()), ValidationError);
    std::filesystem::remove(path);
    REQUIRE_THROWS_AS(PeriodicMesh::load("/nonexistent/mesh.json"), ValidationError);
  }

  SECTION("single flat square tiling the torus is a valid degenerate mesh") {
    auto mesh = flat_square();
    REQUIRE(mesh.num_faces() == 1);
    REQUIRE(mesh.edges().size() == 2);
  }
}

TEST_CASE("admissibility residual", "[mesh]") {
  auto mesh = strip_pair();

  // Constant rotations are exactly admissible.
  REQUIRE(admissibility_residual(mesh, {{0.4, -0.2, 1.0}, {0.4, -0.2, 1.0}}) == 0.0);

  // A jump parallel to the hinge direction (y) is a hinge rotation.
  REQUIRE(admissibility_residual(mesh, {{0, 1, 0}, {0, 0, 0}}) <= 1e-15);

  // A unit jump orthogonal to the hinge has residual 1.
  REQUIRE_THAT(admissibility_residual(mesh, {{1, 0, 0}, {0, 0, 0}}),
               Catch::Matchers::WithinAbs(1.0, 1e-15));

  REQUIRE_THROWS_AS(admissibility_residual(mesh, {{0, 0, 0}}), ValidationError);
}

TEST_CASE("flat square has only trivial modes", "[mesh]") {
  auto modes = mesh_modes(flat_square());
  REQUIRE(modes.trivial_dim == 3);
  REQUIRE(modes.modes.empty());
}

TEST_CASE("strip pair folds silently", "[mesh]") {
  auto modes = mesh_modes(strip_pair());
  REQUIRE(modes.modes.size() == 1);
  const auto& m = modes.modes[0];
  // Folding a flat sheet produces no first-order effective strain.
  REQUIRE(m.silent);
  REQUIRE(m.admissibility <= 1e-10);
  REQUIRE(m.closure <= 1e-8);
  // The mode is a hinge: the jump aligns with y.
  const Eigen::Vector3d jump = m.w[0] - m.w[1];
  REQUIRE(jump.cross(Eigen::Vector3d::UnitY()).norm() <= 1e-10);
}

TEST_CASE("miura cell has exactly one nontrivial mode", "[mesh]") {
  auto mesh = miura_mesh(kMiura, 0.7);
  auto modes = mesh_modes(mesh);
  REQUIRE(modes.kernel_dim == 4);  // 3 rigid rotations + 1 fold mode
  REQUIRE(modes.modes.size() == 1);
  const auto& m = modes.modes[0];
  REQUIRE_FALSE(m.silent);
  REQUIRE(m.admissibility <= 1e-10);
  REQUIRE(m.closure <= 1e-8);

  // Unit stacked norm with canonical sign.
  double nrm = 0;
  for (const auto& wf : m.w) nrm += wf.squaredNorm();
  REQUIRE_THAT(std::sqrt(nrm), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // The mode matches the fold-angle kinematics oracle.
  auto gen = [&](double t) { return miura_mesh(kMiura, t); };
  const double dt = 1e-3;
  auto worc = remove_constant(fold_oracle(gen, 0.7, dt));
  REQUIRE(admissibility_residual(mesh, worc) <= 1e-4);
  double on = std::sqrt(stacked_dot(worc, worc));
  const double align = std::abs(stacked_dot(worc, m.w)) / on;
  REQUIRE_THAT(align, Catch::Matchers::WithinAbs(1.0, 1e-5));

  // Auxetic in-plane response, elliptic bending response.
  const auto pr = poisson_ratio(m.E);
  REQUIRE(pr.nu < 0.0);
  REQUIRE(classify(m.E) == PdeType::Elliptic);
}

TEST_CASE("miura mode strain matches Idot/2 at second order", "[mesh]") {
  auto gen = [&](double t) { return miura_mesh(kMiura, t); };
  const double t0 = 0.7;
  auto modes = mesh_modes(gen(t0));
  REQUIRE(modes.modes.size() == 1);
  const auto& mode = modes.modes[0];

  auto error_at = [&](double dt) {
    // Family route: E_fd = Idot/2 by central differences.
    auto fam = export_family(gen, {t0 - dt, t0, t0 + dt});
    auto rows = family_calibration(fam);
    // Scale the unit mode to unit parameter velocity via the oracle.
    auto worc = remove_constant(fold_oracle(gen, t0, dt));
    const double s = stacked_dot(worc, mode.w);
    return (s * mode.E.matrix() - rows[1].E).norm();
  };

  const double e1 = error_at(0.08), e2 = error_at(0.04), e3 = error_at(0.02);
  const double order12 = std::log2(e1 / e2), order23 = std::log2(e2 / e3);
  CAPTURE(e1, e2, e3);
  REQUIRE(order12 >= 1.9);
  REQUIRE(order23 >= 1.9);
}

TEST_CASE("frame indifference of mesh modes", "[mesh]") {
  auto mesh = miura_mesh(kMiura, 0.7);
  const Eigen::Matrix3d Q =
      Eigen::AngleAxisd(0.9, Eigen::Vector3d(0.3, 1, 2).normalized()).toRotationMatrix();
  auto ma = mesh_modes(mesh);
  auto mb = mesh_modes(mesh.rotated(Q));
  REQUIRE(ma.modes.size() == mb.modes.size());
  for (size_t k = 0; k < ma.modes.size(); ++k) {
    Eigen::Matrix2d Ea = ma.modes[k].E.matrix(), Eb = mb.modes[k].E.matrix();
    if ((Ea - Eb).norm() > (Ea + Eb).norm()) Eb = -Eb;
    REQUIRE((Ea - Eb).norm() <= 1e-10 * std::max(1.0, Ea.norm()));
  }
}

TEST_CASE("miura fold sweep exports an isometric family", "[mesh]") {
  auto gen = [&](double t) { return miura_mesh(kMiura, t); };
  std::vector<double> ts;
  for (int i = 0; i < 21; ++i) ts.push_back(0.2 + i * (1.2 - 0.2) / 20);
  auto fam = export_family(gen, ts);  // throws if any edge length drifts
  REQUIRE(fam.size() == 21);

  auto rows = family_calibration(fam);
  for (const auto& r : rows) {
    REQUIRE(r.type == PdeType::Elliptic);
    REQUIRE(r.nu < 0.0);
  }
}

TEST_CASE("eggbox family is anauxetic and hyperbolic", "[mesh]") {
  auto gen = [&](double t) { return eggbox_mesh(kEggbox, t); };
  std::vector<double> ts;
  for (int i = 0; i < 11; ++i) ts.push_back(0.6 + i * 0.05);
  auto rows = family_calibration(export_family(gen, ts));
  for (const auto& r : rows) {
    REQUIRE(r.type == PdeType::Hyperbolic);
    REQUIRE(r.nu > 0.0);
  }

  // The eggbox cell's nontrivial mode agrees in sign structure.
  auto modes = mesh_modes(eggbox_mesh(kEggbox, 0.8));
  REQUIRE_FALSE(modes.modes.empty());
  REQUIRE_FALSE(modes.modes[0].silent);
  REQUIRE(classify(modes.modes[0].E) == PdeType::Hyperbolic);
}

TEST_CASE("export_family rejects non-isometric generators", "[mesh]") {
  // Varying a side length between samples is not a fold.
  auto bad = [&](double t) { return miura_mesh({1.0 + t, 1.0, 1.3}, 0.7); };
  REQUIRE_THROWS_AS(export_family(bad, {0.0, 0.05, 0.1}), ValidationError);

  // Degenerate generator parameters are rejected outright.
  REQUIRE_THROWS_AS(miura_mesh(kMiura, 0.0), ValidationError);
  REQUIRE_THROWS_AS(miura_mesh(kMiura, 1.3), ValidationError);
  REQUIRE_THROWS_AS(eggbox_mesh(kEggbox, 0.2), ValidationError);

  // A single-sample family exports but cannot be calibrated.
  auto gen = [&](double t) { return miura_mesh(kMiura, t); };
  auto fam = export_family(gen, {0.7});
  REQUIRE_THROWS_AS(family_calibration(fam), ValidationError);
}
