#pragma once

// Periodic polyhedral (creased) unit cells. A mesh lives on the torus:
// vertices carry fractional lattice coordinates, face corners carry
// integer lattice offsets, and every edge is shared by exactly two face
// instances. Infinitesimal isometries are piecewise-rigid motions, so the
// unknowns are per-face rotation vectors w_f constrained along each
// crease by admissibility: the jump of w across an edge must be parallel
// to the edge.

#include <isoshell/errors.hpp>
#include <isoshell/forms.hpp>
#include <isoshell/surface.hpp>

#include <json.hpp>

#include <Eigen/Dense>

#include <array>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

namespace isoshell {

struct MeshVertex {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector2d frac = Eigen::Vector2d::Zero();  // lattice coordinates in [0,1)^2
};

struct FaceCorner {
  int v = 0;
  Eigen::Vector2i off = Eigen::Vector2i::Zero();  // vertex translated by off1 p1 + off2 p2
};

class PeriodicMesh {
 public:
  struct Edge {
    int f = -1, g = -1;          // adjacent faces; g's base instance shifted by shift_g
    Eigen::Vector2i shift_g = Eigen::Vector2i::Zero();
    Eigen::Vector3d a = Eigen::Vector3d::Zero();  // endpoints in f's base frame
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
  };

  PeriodicMesh(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2,
               std::vector<MeshVertex> vertices, std::vector<std::vector<FaceCorner>> faces)
      : p1_(p1), p2_(p2), vertices_(std::move(vertices)), faces_(std::move(faces)) {
    validate_and_build();
  }

  static PeriodicMesh load(const std::string& path);
  nlohmann::ordered_json to_json() const;
  void save(const std::string& path) const;

  const Eigen::Vector3d& p1() const { return p1_; }
  const Eigen::Vector3d& p2() const { return p2_; }
  const std::vector<MeshVertex>& vertices() const { return vertices_; }
  const std::vector<std::vector<FaceCorner>>& faces() const { return faces_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int num_faces() const { return static_cast<int>(faces_.size()); }

  Eigen::Vector3d lattice(const Eigen::Vector2i& off) const {
    return off.x() * p1_ + off.y() * p2_;
  }
  Eigen::Vector3d corner_position(int f, int k) const {
    const auto& c = faces_[f][k];
    return vertices_[c.v].pos + lattice(c.off);
  }
  double diameter() const { return diameter_; }

  /// Mesh rigidly rotated by Q (frame-indifference checks).
  PeriodicMesh rotated(const Eigen::Matrix3d& Q) const {
    auto verts = vertices_;
    for (auto& v : verts) v.pos = Q * v.pos;
    return PeriodicMesh(Q * p1_, Q * p2_, std::move(verts), faces_);
  }

 private:
  void validate_and_build();

  Eigen::Vector3d p1_, p2_;
  std::vector<MeshVertex> vertices_;
  std::vector<std::vector<FaceCorner>> faces_;
  std::vector<Edge> edges_;
  double diameter_ = 1.0;
};

inline void PeriodicMesh::validate_and_build() {
  if (p1_.cross(p2_).norm() <= 1e-12 * std::max(1.0, p1_.norm() * p2_.norm()))
    throw ValidationError("support vectors are linearly dependent");
  if (vertices_.empty() || faces_.empty()) throw ValidationError("mesh has no vertices or faces");
  for (const auto& v : vertices_)
    if (v.frac.x() < 0 || v.frac.x() >= 1 || v.frac.y() < 0 || v.frac.y() >= 1)
      throw ValidationError("vertex lattice coordinates must lie in [0,1)^2");

  double diam = 0;
  for (size_t f = 0; f < faces_.size(); ++f) {
    const auto& face = faces_[f];
    if (face.size() < 3)
      throw ValidationError("face " + std::to_string(f) + " has fewer than 3 corners");
    for (const auto& c : face)
      if (c.v < 0 || c.v >= static_cast<int>(vertices_.size()))
        throw ValidationError("face " + std::to_string(f) + " references a missing vertex");
    for (size_t k = 0; k < face.size(); ++k)
      diam = std::max(diam, corner_position(static_cast<int>(f), static_cast<int>(k)).norm());
  }
  diameter_ = std::max(1.0, diam + p1_.norm() + p2_.norm());

  // Planarity via the best-fit plane of each face.
  for (size_t f = 0; f < faces_.size(); ++f) {
    const auto& face = faces_[f];
    Eigen::MatrixXd X(3, face.size());
    for (size_t k = 0; k < face.size(); ++k)
      X.col(k) = corner_position(static_cast<int>(f), static_cast<int>(k));
    const Eigen::Vector3d centroid = X.rowwise().mean();
    X.colwise() -= centroid;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeFullU);
    const Eigen::Vector3d n = svd.matrixU().col(2);
    const double dev = (n.transpose() * X).cwiseAbs().maxCoeff();
    if (dev > 1e-10 * diameter_)
      throw ValidationError("face " + std::to_string(f) + " is not planar (deviation " +
                            std::to_string(dev) + ")");
  }

  // Undirected edge identification up to lattice shifts.
  struct Instance {
    int face, corner;
    bool forward;
    Eigen::Vector2i anchor;  // offset of the canonical start vertex in this face's frame
  };
  using Key = std::tuple<int, int, int, int>;  // (v_start, v_end, d1, d2), canonical direction
  std::map<Key, std::vector<Instance>> edge_map;
  for (size_t f = 0; f < faces_.size(); ++f) {
    const auto& face = faces_[f];
    for (size_t k = 0; k < face.size(); ++k) {
      const FaceCorner& A = face[k];
      const FaceCorner& B = face[(k + 1) % face.size()];
      if (A.v == B.v && A.off == B.off)
        throw ValidationError("face " + std::to_string(f) + " has a zero-length side");
      const Eigen::Vector2i d = B.off - A.off;
      const Key fwd{A.v, B.v, d.x(), d.y()};
      const Key rev{B.v, A.v, -d.x(), -d.y()};
      const bool is_fwd = fwd <= rev;
      const Key key = is_fwd ? fwd : rev;
      edge_map[key].push_back({static_cast<int>(f), static_cast<int>(k), is_fwd,
                               is_fwd ? A.off : B.off});
    }
  }

  edges_.clear();
  for (const auto& [key, inst] : edge_map) {
    if (inst.size() == 1)
      throw ValidationError("edge of face " + std::to_string(inst[0].face) +
                            " has no partner: mesh does not tile the torus");
    if (inst.size() > 2)
      throw ValidationError("non-manifold edge shared by " + std::to_string(inst.size()) +
                            " face sides");
    if (inst[0].forward == inst[1].forward)
      throw ValidationError("faces " + std::to_string(inst[0].face) + " and " +
                            std::to_string(inst[1].face) + " are inconsistently oriented");
    const auto& [vs, ve, d1, d2] = key;
    Edge e;
    e.f = inst[0].face;
    e.g = inst[1].face;
    e.shift_g = inst[0].anchor - inst[1].anchor;
    e.a = vertices_[vs].pos + lattice(inst[0].anchor);
    e.b = vertices_[ve].pos + lattice(inst[0].anchor + Eigen::Vector2i(d1, d2));
    edges_.push_back(e);
  }

  // Connectivity and lattice-wrap rank over the offset-augmented graph.
  const int F = num_faces();
  std::vector<int> seen(F, 0);
  std::vector<Eigen::Vector2i> shift(F, Eigen::Vector2i::Zero());
  std::queue<int> bfs;
  bfs.push(0);
  seen[0] = 1;
  while (!bfs.empty()) {
    const int f = bfs.front();
    bfs.pop();
    for (const auto& e : edges_) {
      if (e.f == f && !seen[e.g]) {
        seen[e.g] = 1;
        shift[e.g] = shift[f] + e.shift_g;
        bfs.push(e.g);
      } else if (e.g == f && !seen[e.f]) {
        seen[e.f] = 1;
        shift[e.f] = shift[f] - e.shift_g;
        bfs.push(e.f);
      }
    }
  }
  for (int f = 0; f < F; ++f)
    if (!seen[f]) throw ValidationError("mesh face graph is not connected");
  Eigen::Matrix2d wrap = Eigen::Matrix2d::Zero();
  int wrank = 0;
  for (const auto& e : edges_) {
    const Eigen::Vector2i ds = shift[e.f] + e.shift_g - shift[e.g];
    if (ds == Eigen::Vector2i::Zero()) continue;
    const Eigen::Vector2d dd = ds.cast<double>();
    if (wrank == 0) {
      wrap.col(0) = dd;
      wrank = 1;
    } else if (wrank == 1 && std::abs(wrap.col(0).x() * dd.y() - wrap.col(0).y() * dd.x()) > 0.5) {
      wrap.col(1) = dd;
      wrank = 2;
      break;
    }
  }
  if (wrank < 2)
    throw ValidationError("mesh cycles do not wrap both lattice directions: not a torus tiling");
}

/// Max over crease edges of ||(w_f - w_g) ^ unit edge||; zero iff the
/// per-face rotations are admissible.
inline double admissibility_residual(const PeriodicMesh& mesh,
                                     const std::vector<Eigen::Vector3d>& w) {
  if (static_cast<int>(w.size()) != mesh.num_faces())
    throw ValidationError("one rotation vector per face expected");
  double worst = 0;
  for (const auto& e : mesh.edges()) {
    if (e.f == e.g) continue;  // same periodic face: no jump
    const Eigen::Vector3d ehat = (e.b - e.a).normalized();
    worst = std::max(worst, ((w[e.f] - w[e.g]).cross(ehat)).norm());
  }
  return worst;
}

struct MeshMode {
  std::vector<Eigen::Vector3d> w;  // per-face rotations, ||stacked w||_2 = 1
  Eigen::Vector3d p1dot = Eigen::Vector3d::Zero(), p2dot = Eigen::Vector3d::Zero();
  EffectiveStrain E;
  double admissibility = 0;
  double closure = 0;  // worst non-tree cycle residual of the reconstruction
  bool silent = false;
};

struct MeshModes {
  std::vector<MeshMode> modes;  // nontrivial modes, strain carriers first
  int trivial_dim = 3;          // constant rotations
  int kernel_dim = 0;           // total kernel dimension of the constraint matrix
  double sigma_max = 0;
};

namespace detail {

// Deterministic orthonormal pair spanning the plane orthogonal to ehat:
// Gram-Schmidt of the smallest-index coordinate axis not parallel to it.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> edge_normals(const Eigen::Vector3d& ehat) {
  for (int a = 0; a < 3; ++a) {
    Eigen::Vector3d cand = Eigen::Vector3d::Unit(a) - Eigen::Vector3d::Unit(a).dot(ehat) * ehat;
    if (cand.norm() > 0.5) {
      cand.normalize();
      return {cand, ehat.cross(cand)};
    }
  }
  throw NumericError("degenerate edge direction");
}

struct Reconstruction {
  Eigen::Vector3d p1dot, p2dot;
  double closure;
};

// Integrate the deflection along a spanning tree of the offset-augmented
// face graph; the two independent torus cycles determine pdot_1, pdot_2
// and every non-tree edge provides a closure check.
inline Reconstruction reconstruct_mode(const PeriodicMesh& mesh,
                                       const std::vector<Eigen::Vector3d>& w) {
  const int F = mesh.num_faces();
  std::vector<int> seen(F, 0);
  std::vector<Eigen::Vector2i> shift(F, Eigen::Vector2i::Zero());
  std::vector<Eigen::Vector3d> chat(F, Eigen::Vector3d::Zero());
  std::vector<char> in_tree(mesh.edges().size(), 0);

  std::queue<int> bfs;
  bfs.push(0);
  seen[0] = 1;
  while (!bfs.empty()) {
    const int f = bfs.front();
    bfs.pop();
    for (size_t ei = 0; ei < mesh.edges().size(); ++ei) {
      const auto& e = mesh.edges()[ei];
      if (e.f == f && !seen[e.g]) {
        seen[e.g] = 1;
        in_tree[ei] = 1;
        shift[e.g] = shift[f] + e.shift_g;
        const Eigen::Vector3d X = e.a + mesh.lattice(shift[f]);
        chat[e.g] = chat[f] + (w[e.f] - w[e.g]).cross(X);
        bfs.push(e.g);
      } else if (e.g == f && !seen[e.f]) {
        seen[e.f] = 1;
        in_tree[ei] = 1;
        shift[e.f] = shift[f] - e.shift_g;
        const Eigen::Vector3d X = e.a + mesh.lattice(shift[e.f]);
        chat[e.f] = chat[f] + (w[e.g] - w[e.f]).cross(X);
        bfs.push(e.f);
      }
    }
  }

  // Closure equations: ds1 pdot1 + ds2 pdot2 = rhs per edge.
  std::vector<std::pair<Eigen::Vector2i, Eigen::Vector3d>> eqs;
  for (const auto& e : mesh.edges()) {
    const Eigen::Vector2i ds = shift[e.f] + e.shift_g - shift[e.g];
    const Eigen::Vector3d X = e.a + mesh.lattice(shift[e.f]);
    const Eigen::Vector3d rhs = chat[e.f] + (w[e.f] - w[e.g]).cross(X) - chat[e.g] +
                                ds.x() * w[e.g].cross(mesh.p1()) +
                                ds.y() * w[e.g].cross(mesh.p2());
    eqs.push_back({ds, rhs});
  }
  Eigen::MatrixXd A(3 * eqs.size(), 6);
  Eigen::VectorXd b(3 * eqs.size());
  for (size_t k = 0; k < eqs.size(); ++k) {
    A.block<3, 3>(3 * k, 0) = eqs[k].first.x() * Eigen::Matrix3d::Identity();
    A.block<3, 3>(3 * k, 3) = eqs[k].first.y() * Eigen::Matrix3d::Identity();
    b.segment<3>(3 * k) = eqs[k].second;
  }
  const Eigen::VectorXd p = A.colPivHouseholderQr().solve(b);
  Reconstruction out{p.head<3>(), p.tail<3>(), 0.0};
  double wmax = 0;
  for (const auto& wf : w) wmax = std::max(wmax, wf.norm());
  const double scale = std::max(1.0, wmax * mesh.diameter());
  out.closure = (A * p - b).cwiseAbs().maxCoeff() / scale;
  return out;
}

}  // namespace detail

/// Periodic infinitesimal-isometry modes of a polyhedral cell: kernel of
/// the edge-admissibility system over per-face rotations. The constant
/// subspace is reported as trivial; nontrivial modes come normalized to
/// unit stacked norm with the sign fixed by the first nonzero component,
/// strain carriers first.
inline MeshModes mesh_modes(const PeriodicMesh& mesh, double rank_tol = 1e-8) {
  detail::check_rank_tol(rank_tol);
  const int F = mesh.num_faces();
  const int n = 3 * F;

  std::vector<Eigen::Matrix<double, 1, Eigen::Dynamic>> rows;
  for (const auto& e : mesh.edges()) {
    if (e.f == e.g) continue;
    const Eigen::Vector3d ehat = (e.b - e.a).normalized();
    const auto [n1, n2] = detail::edge_normals(ehat);
    for (const Eigen::Vector3d& nv : {n1, n2}) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
      row.segment<3>(3 * e.f) = nv.transpose();
      row.segment<3>(3 * e.g) = -nv.transpose();
      rows.push_back(row);
    }
  }

  MeshModes out;
  Eigen::MatrixXd kernel;  // columns: orthonormal kernel basis
  if (rows.empty()) {
    out.sigma_max = 0;
    out.kernel_dim = n;
    kernel = Eigen::MatrixXd::Identity(n, n);
  } else {
    Eigen::MatrixXd C(rows.size(), n);
    for (size_t r = 0; r < rows.size(); ++r) C.row(r) = rows[r];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    out.sigma_max = sv.size() ? sv(0) : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_tol * out.sigma_max) ++rank;
    out.kernel_dim = n - rank;
    kernel = svd.matrixV().rightCols(n - rank);
  }

  // Remove the constant (rigid rotation) subspace.
  Eigen::MatrixXd constants = Eigen::MatrixXd::Zero(n, 3);
  for (int f = 0; f < F; ++f) constants.block<3, 3>(3 * f, 0) = Eigen::Matrix3d::Identity();
  constants /= std::sqrt(static_cast<double>(F));
  std::vector<Eigen::VectorXd> nontrivial;
  for (Eigen::Index k = 0; k < kernel.cols(); ++k) {
    Eigen::VectorXd v = kernel.col(k);
    v -= constants * (constants.transpose() * v);
    for (const auto& q : nontrivial) v -= q * (q.dot(v));
    if (v.norm() > 1e-8) nontrivial.push_back(v.normalized());
  }

  if (nontrivial.empty()) return out;

  auto unstack = [&](const Eigen::VectorXd& v) {
    std::vector<Eigen::Vector3d> w(F);
    for (int f = 0; f < F; ++f) w[f] = v.segment<3>(3 * f);
    return w;
  };

  // Strain-principal rotation over the nontrivial kernel.
  const int K = static_cast<int>(nontrivial.size());
  Eigen::MatrixXd V(n, K);
  for (int k = 0; k < K; ++k) V.col(k) = nontrivial[k];
  Eigen::MatrixXd S(3, K);
  for (int k = 0; k < K; ++k) {
    const auto rec = detail::reconstruct_mode(mesh, unstack(V.col(k)));
    const Eigen::Vector3d p1d = rec.p1dot, p2d = rec.p2dot;
    S.col(k) << p1d.dot(mesh.p1()), p2d.dot(mesh.p2()),
        std::sqrt(2.0) * 0.5 * (p1d.dot(mesh.p2()) + p2d.dot(mesh.p1()));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> ssvd(S, Eigen::ComputeFullV);
  V = (V * ssvd.matrixV()).eval();

  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd col = V.col(k);
    detail::canonicalize_sign(col);
    MeshMode mode;
    mode.w = unstack(col);
    const auto rec = detail::reconstruct_mode(mesh, mode.w);
    if (rec.closure > 1e-8)
      throw NumericError("mode reconstruction cycle closure failed (residual " +
                         std::to_string(rec.closure) + ")");
    mode.p1dot = rec.p1dot;
    mode.p2dot = rec.p2dot;
    mode.closure = rec.closure;
    mode.E.E11 = mode.p1dot.dot(mesh.p1());
    mode.E.E22 = mode.p2dot.dot(mesh.p2());
    mode.E.E12 = 0.5 * (mode.p1dot.dot(mesh.p2()) + mode.p2dot.dot(mesh.p1()));
    mode.admissibility = admissibility_residual(mesh, mode.w);
    mode.silent = mode.E.norm() <= rank_tol;
    out.modes.push_back(std::move(mode));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in cell generators. Both are translation meshes (sums of two
// planar zigzags), which keeps panel shapes exactly constant along the
// fold family.

struct MiuraParams {
  double l1 = 1.0, l2 = 1.0;
  double alpha = 1.3;  // panel angle parameter in (0, pi/2)
};

/// Miura-ori 4-panel cell at fold state t in (0, alpha): the sum of a
/// zigzag in the x-z plane (half-angle t) and a zigzag in the x-y plane
/// whose obliquity keeps the panel angle fixed.
inline PeriodicMesh miura_mesh(const MiuraParams& p, double t) {
  if (!(p.l1 > 0 && p.l2 > 0)) throw ValidationError("miura: side lengths must be positive");
  if (!(p.alpha > 0 && p.alpha < EIGEN_PI / 2))
    throw ValidationError("miura: alpha must lie in (0, pi/2)");
  if (!(t > 0 && t < p.alpha))
    throw ValidationError("miura: fold parameter must lie strictly inside (0, alpha)");
  const double spsi = std::cos(p.alpha) / std::cos(t);
  const double cpsi = std::sqrt(1.0 - spsi * spsi);
  const Eigen::Vector3d c1 = p.l1 * Eigen::Vector3d(std::cos(t), 0, std::sin(t));
  const Eigen::Vector3d d1 = p.l2 * Eigen::Vector3d(spsi, cpsi, 0);
  const Eigen::Vector3d P1(2 * p.l1 * std::cos(t), 0, 0);
  const Eigen::Vector3d P2(0, 2 * p.l2 * cpsi, 0);

  std::vector<MeshVertex> verts = {
      {Eigen::Vector3d::Zero(), {0.0, 0.0}},
      {c1, {0.5, 0.0}},
      {d1, {0.0, 0.5}},
      {c1 + d1, {0.5, 0.5}},
  };
  std::vector<std::vector<FaceCorner>> faces = {
      {{0, {0, 0}}, {1, {0, 0}}, {3, {0, 0}}, {2, {0, 0}}},
      {{1, {0, 0}}, {0, {1, 0}}, {2, {1, 0}}, {3, {0, 0}}},
      {{2, {0, 0}}, {3, {0, 0}}, {1, {0, 1}}, {0, {0, 1}}},
      {{3, {0, 0}}, {2, {1, 0}}, {0, {1, 1}}, {1, {0, 1}}},
  };
  return PeriodicMesh(P1, P2, std::move(verts), std::move(faces));
}

struct EggboxParams {
  double l1 = 1.0, l2 = 1.0;
  double alpha = 1.2;  // panel angle parameter: sin(t) sin(t2) = cos(alpha)
};

/// Eggbox-like 4-panel cell: the sum of zigzags in the x-z and y-z
/// planes. Valid for t in (asin(cos alpha), pi/2).
inline PeriodicMesh eggbox_mesh(const EggboxParams& p, double t) {
  if (!(p.l1 > 0 && p.l2 > 0)) throw ValidationError("eggbox: side lengths must be positive");
  if (!(p.alpha > 0 && p.alpha < EIGEN_PI / 2))
    throw ValidationError("eggbox: alpha must lie in (0, pi/2)");
  const double lo = std::asin(std::cos(p.alpha));
  if (!(t > lo && t < EIGEN_PI / 2))
    throw ValidationError("eggbox: fold parameter must lie strictly inside (asin(cos alpha), pi/2)");
  const double st2 = std::cos(p.alpha) / std::sin(t);
  const double ct2 = std::sqrt(1.0 - st2 * st2);
  const Eigen::Vector3d c1 = p.l1 * Eigen::Vector3d(std::cos(t), 0, std::sin(t));
  const Eigen::Vector3d d1 = p.l2 * Eigen::Vector3d(0, ct2, st2);
  const Eigen::Vector3d P1(2 * p.l1 * std::cos(t), 0, 0);
  const Eigen::Vector3d P2(0, 2 * p.l2 * ct2, 0);

  std::vector<MeshVertex> verts = {
      {Eigen::Vector3d::Zero(), {0.0, 0.0}},
      {c1, {0.5, 0.0}},
      {d1, {0.0, 0.5}},
      {c1 + d1, {0.5, 0.5}},
  };
  std::vector<std::vector<FaceCorner>> faces = {
      {{0, {0, 0}}, {1, {0, 0}}, {3, {0, 0}}, {2, {0, 0}}},
      {{1, {0, 0}}, {0, {1, 0}}, {2, {1, 0}}, {3, {0, 0}}},
      {{2, {0, 0}}, {3, {0, 0}}, {1, {0, 1}}, {0, {0, 1}}},
      {{3, {0, 0}}, {2, {1, 0}}, {0, {1, 1}}, {1, {0, 1}}},
  };
  return PeriodicMesh(P1, P2, std::move(verts), std::move(faces));
}

/// Sampled fold family for calibration. Every sample must be isometric to
/// the first: edge lengths and face diagonals are compared entry by entry.
inline ModeFamily export_family(const std::function<PeriodicMesh(double)>& generator,
                                const std::vector<double>& ts) {
  if (ts.empty()) throw ValidationError("family needs at least one sample");
  std::vector<FamilySample> samples;
  std::vector<double> ref;
  for (size_t i = 0; i < ts.size(); ++i) {
    if (i > 0 && !(ts[i] > ts[i - 1]))
      throw ValidationError("family parameters must increase strictly");
    const PeriodicMesh mesh = generator(ts[i]);
    std::vector<double> lengths;
    for (const auto& e : mesh.edges()) lengths.push_back((e.b - e.a).norm());
    for (int f = 0; f < mesh.num_faces(); ++f) {
      const auto& face = mesh.faces()[f];
      for (size_t k = 0; k < face.size(); ++k)
        for (size_t l = k + 2; l < face.size(); ++l)
          if (!(k == 0 && l == face.size() - 1))
            lengths.push_back(
                (mesh.corner_position(f, static_cast<int>(k)) -
                 mesh.corner_position(f, static_cast<int>(l)))
                    .norm());
    }
    if (i == 0) {
      ref = lengths;
    } else {
      if (lengths.size() != ref.size())
        throw ValidationError("family samples have different combinatorics");
      double scale = 1e-300;
      for (double L : ref) scale = std::max(scale, L);
      for (size_t k = 0; k < lengths.size(); ++k)
        if (std::abs(lengths[k] - ref[k]) > 1e-10 * scale)
          throw ValidationError("family samples are not isometric (length mismatch " +
                                std::to_string(std::abs(lengths[k] - ref[k])) + " at sample " +
                                std::to_string(i) + ")");
    }
    samples.push_back({ts[i], mesh.p1(), mesh.p2()});
  }
  return ModeFamily::from_supports(std::move(samples));
}

// ---------------------------------------------------------------------------
// JSON mesh format, version 1 (see docs/mesh-format.md).

inline nlohmann::ordered_json PeriodicMesh::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["p1"] = {p1_.x(), p1_.y(), p1_.z()};
  j["p2"] = {p2_.x(), p2_.y(), p2_.z()};
  j["vertices"] = nlohmann::ordered_json::array();
  for (const auto& v : vertices_) {
    nlohmann::ordered_json jv;
    jv["pos"] = {v.pos.x(), v.pos.y(), v.pos.z()};
    jv["frac"] = {v.frac.x(), v.frac.y()};
    j["vertices"].push_back(jv);
  }
  j["faces"] = nlohmann::ordered_json::array();
  for (const auto& face : faces_) {
    nlohmann::ordered_json jf = nlohmann::ordered_json::array();
    for (const auto& c : face) {
      nlohmann::ordered_json jc;
      jc["v"] = c.v;
      jc["off"] = {c.off.x(), c.off.y()};
      jf.push_back(jc);
    }
    j["faces"].push_back(jf);
  }
  return j;
}

inline PeriodicMesh PeriodicMesh::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open mesh file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("mesh file " + path + " is not valid JSON: " + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported mesh format version");
    auto vec3 = [](const nlohmann::json& a) {
      return Eigen::Vector3d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
    };
    std::vector<MeshVertex> verts;
    for (const auto& jv : j.at("vertices")) {
      MeshVertex v;
      v.pos = vec3(jv.at("pos"));
      v.frac = {jv.at("frac").at(0).get<double>(), jv.at("frac").at(1).get<double>()};
      verts.push_back(v);
    }
    std::vector<std::vector<FaceCorner>> faces;
    for (const auto& jf : j.at("faces")) {
      std::vector<FaceCorner> face;
      for (const auto& jc : jf) {
        FaceCorner c;
        c.v = jc.at("v").get<int>();
        c.off = {jc.at("off").at(0).get<int>(), jc.at("off").at(1).get<int>()};
        face.push_back(c);
      }
      faces.push_back(std::move(face));
    }
    return PeriodicMesh(vec3(j.at("p1")), vec3(j.at("p2")), std::move(verts), std::move(faces));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("mesh file " + path + " violates the schema: " + e.what());
  }
}

inline void PeriodicMesh::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write mesh file " + path);
  out << to_json().dump(2) << "\n";
}

}  // namespace isoshell
