#pragma once

// Linearized Monge-Ampere analysis of smooth periodic graphs: operator
// assembly, periodic infinitesimal-isometry kernels, effective strains,
// corrector solves and the space of admissible effective curvatures.
//
// The operator acting on a periodic deflection zdot is
//     M_z zdot = z11 zdot22 + z22 zdot11 - 2 z12 zdot12
// (indices denote partial derivatives). On the strict-band grid it is
// self-adjoint under the mean-value inner product and annihilates
// constants; both properties hold to machine precision because variable
// coefficient products are de-aliased.

#include <isoshell/cellgrid.hpp>
#include <isoshell/forms.hpp>
#include <isoshell/linalg.hpp>

#include <algorithm>
#include <limits>
#include <memory>
#include <mutex>
#include <vector>

namespace isoshell {

namespace detail {

// Fine-grid samples of a strict-band field (3/2 zero padding).
inline Eigen::MatrixXd refine(const ScalarField& f) {
  const auto& c = f.cell();
  auto F = dft2(f.samples());
  zero_nyquist(F);
  return idft2(pad_spectrum(F, fine_size(c.N1), fine_size(c.N2)));
}

}  // namespace detail

class MongeOperator {
 public:
  explicit MongeOperator(const ScalarField& z)
      : cell_(z.cell()),
        z_(band_project(z)),
        z11_(diff(z_, Dir::U, 2)),
        z22_(diff(z_, Dir::V, 2)),
        z12_(diff(diff(z_, Dir::U, 1), Dir::V, 1)),
        f11_(detail::refine(z11_)),
        f22_(detail::refine(z22_)),
        f12_(detail::refine(z12_)) {}

  const UnitCell& cell() const { return cell_; }
  const ScalarField& z() const { return z_; }
  const ScalarField& z11() const { return z11_; }
  const ScalarField& z22() const { return z22_; }
  const ScalarField& z12() const { return z12_; }

  /// M_z zdot with de-aliased coefficient products.
  ScalarField apply(const ScalarField& zdot) const {
    if (!(zdot.cell() == cell_)) throw ValidationError("unit cell mismatch");
    const int M1 = detail::fine_size(cell_.N1), M2 = detail::fine_size(cell_.N2);
    auto F = detail::dft2(zdot.samples());
    detail::zero_nyquist(F);
    const auto duu = detail::idft2(detail::pad_spectrum(
        detail::deriv_spectrum(F, Dir::U, 2, cell_.L1, cell_.L2), M1, M2));
    const auto dvv = detail::idft2(detail::pad_spectrum(
        detail::deriv_spectrum(F, Dir::V, 2, cell_.L1, cell_.L2), M1, M2));
    const auto duv = detail::idft2(detail::pad_spectrum(
        detail::deriv_spectrum(detail::deriv_spectrum(F, Dir::U, 1, cell_.L1, cell_.L2), Dir::V, 1,
                               cell_.L1, cell_.L2),
        M1, M2));
    Eigen::MatrixXd r =
        f11_.cwiseProduct(dvv) + f22_.cwiseProduct(duu) - 2.0 * f12_.cwiseProduct(duv);
    return ScalarField(cell_, detail::idft2(detail::truncate_spectrum(detail::dft2(r), cell_.N1, cell_.N2)));
  }

  /// Right-hand side -M_z q of the corrector equation. Since the Hessian
  /// of q is constant this is a plain linear combination of the
  /// coefficient fields: -(g z11 + e z22 - 2 f z12).
  ScalarField rhs_for(const QuadraticForm& q) const {
    Eigen::MatrixXd r =
        -(q.g * z11_.samples() + q.e * z22_.samples() - 2.0 * q.f * z12_.samples());
    return ScalarField(cell_, std::move(r));
  }

  /// Magnitude of the coefficient fields; sets the scale below which a
  /// corrector right-hand side counts as identically zero.
  double rhs_scale() const {
    return std::max({norm(z11_), norm(z22_), norm(z12_), 1e-300});
  }

  struct Factorization {
    BandBasis basis;
    Eigen::MatrixXd A;        // dense matrix on the zero-mean strict band
    double symmetry_defect;   // max |A - A^T| before symmetrization
    SymmetricEigen eig;
    double sigma_max;
    bool degenerate;          // operator norm below 1e-12
  };

  /// Dense factorization on the zero-mean band basis; computed once and
  /// cached (the operator itself stays immutable).
  const Factorization& factorization() const {
    std::call_once(cache_->once, [this] {
      auto f = std::make_unique<Factorization>(assemble());
      cache_->fact = std::move(f);
    });
    return *cache_->fact;
  }

 private:
  Factorization assemble() const {
    BandBasis basis(cell_);
    const int m = basis.size();
    Eigen::MatrixXd A(m - 1, m - 1);
    for (int beta = 1; beta < m; ++beta) {
      const auto col = basis.coefficients(apply(basis.field(beta)));
      A.col(beta - 1) = col.tail(m - 1);
    }
    const double defect = (A - A.transpose()).cwiseAbs().maxCoeff();
    A = 0.5 * (A + A.transpose()).eval();
    auto eig = eigen_sym(A);
    const double sigma =
        eig.values.size() ? std::max(std::abs(eig.values(0)), std::abs(eig.values(eig.values.size() - 1)))
                          : 0.0;
    return {std::move(basis), std::move(A), defect, std::move(eig), sigma, sigma < 1e-12};
  }

  UnitCell cell_;
  ScalarField z_, z11_, z22_, z12_;
  Eigen::MatrixXd f11_, f22_, f12_;

  struct Cache {
    std::once_flag once;
    std::unique_ptr<Factorization> fact;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// |<g, M_z f> - <f, M_z g>|, the discrete self-adjointness defect.
inline double self_adjoint_defect(const MongeOperator& op, const ScalarField& f,
                                  const ScalarField& g) {
  return std::abs(inner(g, op.apply(f)) - inner(f, op.apply(g)));
}

/// Effective infinitesimal strain of a periodic isometry mode zdot on the
/// graph of z: E = -(1/2) mean(grad zdot grad^T z + grad z grad^T zdot).
/// Meaningful when zdot lies in the kernel of M_z.
inline EffectiveStrain effective_strain(const ScalarField& z, const ScalarField& zdot) {
  const auto zu = diff(z, Dir::U), zv = diff(z, Dir::V);
  const auto du = diff(zdot, Dir::U), dv = diff(zdot, Dir::V);
  EffectiveStrain E;
  E.E11 = -inner(zu, du);
  E.E22 = -inner(zv, dv);
  E.E12 = -0.5 * (inner(zu, dv) + inner(zv, du));
  return E;
}

struct GraphMode {
  ScalarField zdot;   // unit mean-value norm, constants removed
  EffectiveStrain E;
  bool silent = false;  // ||E|| below rank_tol: imposes no constraint
};

struct GraphKernel {
  std::vector<GraphMode> modes;
  bool degenerate = false;  // zero operator: every periodic field is a mode
  double sigma_max = 0;
};

namespace detail {

inline void check_rank_tol(double rank_tol) {
  if (!(rank_tol > 0) || rank_tol > 1e-4)
    throw ValidationError("rank_tol must lie in (0, 1e-4]");
}

// Flip sign so the first significant coefficient is positive.
inline void canonicalize_sign(Eigen::VectorXd& v) {
  const double thr = 1e-8 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) > thr) {
      if (v(i) < 0) v = -v;
      return;
    }
}

}  // namespace detail

/// Orthonormal basis of periodic infinitesimal-isometry modes (kernel of
/// M_z at the given relative rank tolerance), each paired with its
/// effective strain. Constants are removed analytically. The basis is
/// rotated into strain-principal form: the kernel subspace of a hyperbolic
/// profile can be much larger than the classically known modes, so the
/// strain map is diagonalized over it and the (at most three) strain-
/// carrying directions are listed first, followed by the silent ones.
inline GraphKernel periodic_kernel(const MongeOperator& op, double rank_tol = 1e-8) {
  detail::check_rank_tol(rank_tol);
  const auto& f = op.factorization();
  GraphKernel out;
  out.sigma_max = f.sigma_max;
  if (f.degenerate) {
    out.degenerate = true;
    return out;
  }
  const int n = static_cast<int>(f.eig.values.size());
  std::vector<int> idx;
  for (int i = 0; i < n; ++i)
    if (std::abs(f.eig.values(i)) <= rank_tol * f.sigma_max) idx.push_back(i);
  if (idx.empty()) return out;

  const int K = static_cast<int>(idx.size());
  const int m = f.basis.size();
  Eigen::MatrixXd V(n, K);
  for (int k = 0; k < K; ++k) V.col(k) = f.eig.vectors.col(idx[k]);

  auto mode_of = [&](const Eigen::VectorXd& col) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(m);
    full.tail(m - 1) = col;
    return f.basis.synthesize(full);
  };

  // Strain map on the kernel; sqrt(2) on the shear entry makes the column
  // norm equal the Frobenius norm of E.
  Eigen::MatrixXd S(3, K);
  for (int k = 0; k < K; ++k) {
    const EffectiveStrain E = effective_strain(op.z(), mode_of(V.col(k)));
    S.col(k) << E.E11, E.E22, std::sqrt(2.0) * E.E12;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeFullV);
  V = (V * svd.matrixV()).eval();

  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd col = V.col(k);
    detail::canonicalize_sign(col);
    GraphMode mode{mode_of(col), {}, false};
    mode.E = effective_strain(op.z(), mode.zdot);
    mode.silent = mode.E.norm() <= rank_tol;
    if (mode.E.E22 < mode.E.E11) {
      // Orient strain carriers so that E22 >= E11 (stretch along v).
      mode.zdot = -1.0 * mode.zdot;
      mode.E = {-mode.E.E11, -mode.E.E22, -mode.E.E12};
    }
    out.modes.push_back(std::move(mode));
  }
  return out;
}

struct CorrectorSolution {
  ScalarField ztilde;
  double residual = 0;       // ||M ztilde - r|| / ||r||, 0/0 -> 0
  double compatibility = 0;  // norm of the projection of r onto ker M + constants
};

/// Minimum-norm least-squares corrector for M_z(ztilde + q) = 0.
/// Infeasibility shows up as compatibility > tol, never as an exception.
inline CorrectorSolution corrector_solve(const MongeOperator& op, const QuadraticForm& q,
                                         double rank_tol = 1e-8) {
  detail::check_rank_tol(rank_tol);
  const auto& f = op.factorization();
  const ScalarField r = op.rhs_for(q);
  const Eigen::VectorXd coef = f.basis.coefficients(r);
  const double r0 = coef(0);
  const Eigen::VectorXd rv = coef.tail(coef.size() - 1);
  const double rnorm = coef.norm();
  if (rnorm <= 1e-12 * q.norm() * op.rhs_scale()) {
    // The right-hand side vanishes identically: q is already an
    // infinitesimal isometry of the graph.
    return {ScalarField::zero(op.cell()), 0.0, 0.0};
  }

  const Eigen::VectorXd y = f.eig.vectors.transpose() * rv;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rv.size());
  double kernel_sq = r0 * r0;
  const double cut = rank_tol * f.sigma_max;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(f.eig.values(i)) > cut)
      x += f.eig.vectors.col(i) * (y(i) / f.eig.values(i));
    else
      kernel_sq += y(i) * y(i);
  }
  CorrectorSolution out;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(coef.size());
  full.tail(coef.size() - 1) = x;
  out.ztilde = f.basis.synthesize(full);
  out.compatibility = std::sqrt(kernel_sq);
  const double res_abs = std::sqrt((f.A * x - rv).squaredNorm() + r0 * r0);
  out.residual = rnorm > 0 ? res_abs / rnorm : 0.0;
  return out;
}

struct IsometrySpace {
  std::vector<QuadraticForm> basis;            // unit Euclidean norm, canonical signs
  std::vector<CorrectorSolution> verification;  // corrector per basis element
  bool all_admissible = false;                 // degenerate (flat) graph
};

/// Null space of q -> (adj(H_q) . E_k)_k over the given strains; the
/// constraint each non-silent periodic mode places on effective bending.
inline std::vector<QuadraticForm> isometry_space_from_strains(
    const std::vector<EffectiveStrain>& strains, double rank_tol = 1e-8) {
  detail::check_rank_tol(rank_tol);
  Eigen::Matrix3d P = Eigen::Matrix3d::Identity();
  if (!strains.empty()) {
    Eigen::MatrixXd C(strains.size(), 3);
    for (size_t k = 0; k < strains.size(); ++k)
      C.row(k) << strains[k].E22, -2.0 * strains[k].E12, strains[k].E11;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_tol * sv(0)) ++rank;
    P -= svd.matrixV().leftCols(rank) * svd.matrixV().leftCols(rank).transpose();
  }
  // Deterministic basis of range(P): project the coordinate axes.
  std::vector<QuadraticForm> basis;
  for (int a = 0; a < 3; ++a) {
    Eigen::Vector3d w = P.col(a);
    for (const auto& qb : basis) w -= w.dot(qb.vec()) * qb.vec();
    if (w.norm() > 1e-6) {
      w.normalize();
      Eigen::VectorXd wv = w;
      detail::canonicalize_sign(wv);
      basis.push_back(QuadraticForm::from_vec(wv));
    }
  }
  return basis;
}

/// Admissible effective curvatures of the graph (Theorem-level output):
/// null space of the constraints from all non-silent kernel strains, each
/// basis element verified by a corrector solve.
inline IsometrySpace effective_isometry_space(const MongeOperator& op, double rank_tol = 1e-8) {
  const GraphKernel kernel = periodic_kernel(op, rank_tol);
  IsometrySpace out;
  if (kernel.degenerate) {
    out.all_admissible = true;
    out.basis = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  } else {
    std::vector<EffectiveStrain> strains;
    for (const auto& m : kernel.modes)
      if (!m.silent) strains.push_back(m.E);
    out.basis = isometry_space_from_strains(strains, rank_tol);
  }
  for (const auto& q : out.basis) out.verification.push_back(corrector_solve(op, q, rank_tol));
  return out;
}

struct TranslationReport {
  double A = 0;             // mean a'^2
  double B = 0;             // mean b'^2
  EffectiveStrain E;        // diag(-A, B)
  double e_over_g = 0;      // A/B where defined
  bool parabolic = false;   // B = 0: cylindrical degeneracy, det E = 0
  double max_E12 = 0;       // over all periodic kernel modes (unshearability)
  GraphKernel kernel;
  IsometrySpace qspace;
};

/// Analysis of the translation graph z(u,v) = a(u) + b(v).
inline TranslationReport translation_report(const Expr& a, const Expr& b, const UnitCell& cell,
                                            double rank_tol = 1e-8) {
  if (a.uses_v()) throw ValidationError("translation profile a must depend on u only");
  if (b.uses_u()) throw ValidationError("translation path b must depend on v only");
  const ScalarField fa = sample(a, cell), fb = sample(b, cell);
  TranslationReport rep;
  {
    const auto ap = diff(fa, Dir::U);
    const auto bp = diff(fb, Dir::V);
    rep.A = inner(ap, ap);
    rep.B = inner(bp, bp);
  }
  rep.E = {-rep.A, rep.B, 0.0};
  rep.parabolic = rep.B <= 1e-14 * std::max(1.0, rep.A);
  rep.e_over_g = rep.parabolic ? std::numeric_limits<double>::quiet_NaN() : rep.A / rep.B;
  const MongeOperator op(fa + fb);
  rep.kernel = periodic_kernel(op, rank_tol);
  for (const auto& m : rep.kernel.modes) rep.max_E12 = std::max(rep.max_E12, std::abs(m.E.E12));
  rep.qspace = effective_isometry_space(op, rank_tol);
  return rep;
}

}  // namespace isoshell
