#pragma once

// Quadratic forms of effective curvature/twist, effective strain tensors,
// and the algebraic operations tying them together: the bending
// constraint residual, PDE type classification and the effective
// Poisson's ratio.

#include <isoshell/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace isoshell {

/// q(u,v) = e u^2/2 + f uv + g v^2/2. Hessian [[e,f],[f,g]],
/// adjugate [[g,-f],[-f,e]].
struct QuadraticForm {
  double e = 0, f = 0, g = 0;

  Eigen::Matrix2d hessian() const {
    Eigen::Matrix2d H;
    H << e, f, f, g;
    return H;
  }
  Eigen::Matrix2d adjugate() const {
    Eigen::Matrix2d A;
    A << g, -f, -f, e;
    return A;
  }
  Eigen::Vector3d vec() const { return {e, f, g}; }
  static QuadraticForm from_vec(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
  double norm() const { return vec().norm(); }
  double operator()(double u, double v) const { return 0.5 * e * u * u + f * u * v + 0.5 * g * v * v; }
};

/// Symmetric 2x2 effective infinitesimal strain.
struct EffectiveStrain {
  double E11 = 0, E22 = 0, E12 = 0;

  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d E;
    E << E11, E12, E12, E22;
    return E;
  }
  static EffectiveStrain from_matrix(const Eigen::Matrix2d& m) {
    return {m(0, 0), m(1, 1), 0.5 * (m(0, 1) + m(1, 0))};
  }
  double det() const { return E11 * E22 - E12 * E12; }
  double norm() const { return matrix().norm(); }  // Frobenius
};

/// Bending constraint of an effective strain on a quadratic form:
/// adj(H_q) . E = E11 g + E22 e - 2 E12 f. Vanishes iff q is compatible
/// with the strain.
inline double constraint_residual(const QuadraticForm& q, const EffectiveStrain& E) {
  return E.E11 * q.g + E.E22 * q.e - 2.0 * E.E12 * q.f;
}

enum class PdeType { Elliptic, Hyperbolic, Parabolic };

inline std::string to_string(PdeType t) {
  switch (t) {
    case PdeType::Elliptic: return "elliptic";
    case PdeType::Hyperbolic: return "hyperbolic";
    case PdeType::Parabolic: return "parabolic";
  }
  return "?";
}

/// Type of the effective-surface PDE by the sign of det E.
inline PdeType classify(const EffectiveStrain& E) {
  const double tol = 1e-12 * E.norm() * E.norm();
  const double d = E.det();
  if (d > tol) return PdeType::Elliptic;
  if (d < -tol) return PdeType::Hyperbolic;
  return PdeType::Parabolic;
}

struct PoissonRatio {
  double nu = 0;
  Eigen::Matrix2d principal_dirs = Eigen::Matrix2d::Identity();  // columns, det +1
  double lambda1 = 0, lambda2 = 0;  // |lambda2| >= |lambda1|
  bool degenerate = false;
};

/// Effective Poisson's ratio nu = -lambda1/lambda2 in the principal frame
/// of E, with lambda2 the larger-magnitude principal strain. Degenerate
/// when the dominant strain vanishes.
inline PoissonRatio poisson_ratio(const EffectiveStrain& E) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(E.matrix());
  Eigen::Vector2d lam = es.eigenvalues();
  Eigen::Matrix2d V = es.eigenvectors();
  if (std::abs(lam(0)) > std::abs(lam(1))) {
    std::swap(lam(0), lam(1));
    V.col(0).swap(V.col(1));
  }
  PoissonRatio out;
  out.lambda1 = lam(0);
  out.lambda2 = lam(1);
  // Deterministic frame: first significant entry of each column positive,
  // then orient to det +1.
  for (int c = 0; c < 2; ++c) {
    const double lead = std::abs(V(0, c)) >= std::abs(V(1, c)) ? V(0, c) : V(1, c);
    if (lead < 0) V.col(c) *= -1;
  }
  if (V.determinant() < 0) V.col(1) *= -1;
  out.principal_dirs = V;
  if (std::abs(lam(1)) <= 1e-12 * std::max(E.norm(), 1e-300)) {
    out.degenerate = true;
    return out;
  }
  out.nu = -lam(0) / lam(1);
  return out;
}

}  // namespace isoshell
