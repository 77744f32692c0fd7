#pragma once

// Periodic immersed surfaces x(u,v) = u p1 + v p2 + xtilde(u,v) and the
// rotation-field analysis of their periodic infinitesimal isometries.
//
// The central object is the operator
//     D_x w = w_v ^ x_u - w_u ^ x_v
// acting on periodic vector fields w. Its kernel consists of the rotation
// fields of periodic infinitesimal isometries; constant fields are the
// trivial rigid rotations. For each nontrivial mode the support-vector
// velocities are pdot_mu = mean(w ^ x_mu) and the effective strain is the
// symmetrized Gram product with the support vectors.

#include <isoshell/cellgrid.hpp>
#include <isoshell/forms.hpp>
#include <isoshell/linalg.hpp>
#include <isoshell/monge.hpp>

#include <charconv>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <vector>

namespace isoshell {

class PeriodicSurface {
 public:
  PeriodicSurface(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2, const VectorField& xtilde)
      : cell_(xtilde.cell()),
        p1_(p1),
        p2_(p2),
        xtilde_(band_project(xtilde.component(0)), band_project(xtilde.component(1)),
                band_project(xtilde.component(2))),
        xu_(diff(xtilde_, Dir::U)),
        xv_(diff(xtilde_, Dir::V)) {
    for (int c = 0; c < 3; ++c) {
      xu_.comp(c).array() += p1_(c);
      xv_.comp(c).array() += p2_(c);
    }
    validate();
  }

  /// The graph (u, v, z(u,v)) as a periodic surface.
  static PeriodicSurface graph(const ScalarField& z) {
    VectorField xt(ScalarField::zero(z.cell()), ScalarField::zero(z.cell()), z);
    return PeriodicSurface({1, 0, 0}, {0, 1, 0}, xt);
  }

  const UnitCell& cell() const { return cell_; }
  const Eigen::Vector3d& p1() const { return p1_; }
  const Eigen::Vector3d& p2() const { return p2_; }
  const VectorField& corrugation() const { return xtilde_; }
  const VectorField& tangent_u() const { return xu_; }
  const VectorField& tangent_v() const { return xv_; }

  /// Gram matrix of the support vectors.
  Eigen::Matrix2d effective_metric() const {
    Eigen::Matrix2d I;
    I << p1_.dot(p1_), p1_.dot(p2_), p2_.dot(p1_), p2_.dot(p2_);
    return I;
  }

  /// Pointwise first fundamental form components (g11, g12, g22).
  std::array<Eigen::MatrixXd, 3> metric_samples() const {
    std::array<Eigen::MatrixXd, 3> g;
    g[0] = Eigen::MatrixXd::Zero(cell_.N1, cell_.N2);
    g[1] = g[0];
    g[2] = g[0];
    for (int c = 0; c < 3; ++c) {
      g[0] += xu_.comp(c).cwiseProduct(xu_.comp(c));
      g[1] += xu_.comp(c).cwiseProduct(xv_.comp(c));
      g[2] += xv_.comp(c).cwiseProduct(xv_.comp(c));
    }
    return g;
  }

  /// Surface isometric to this one under a fixed rotation Q.
  PeriodicSurface rotated(const Eigen::Matrix3d& Q) const {
    VectorField xt = VectorField::zero(cell_);
    for (int c = 0; c < 3; ++c)
      for (int d = 0; d < 3; ++d) xt.comp(c) += Q(c, d) * xtilde_.comp(d);
    return PeriodicSurface(Q * p1_, Q * p2_, xt);
  }

 private:
  void validate() const {
    const double scale = std::max(1.0, p1_.norm() * p2_.norm());
    double min_cross = std::numeric_limits<double>::max();
    for (int i = 0; i < cell_.N1; ++i)
      for (int j = 0; j < cell_.N2; ++j)
        min_cross = std::min(min_cross, xu_.at(i, j).cross(xv_.at(i, j)).norm());
    if (min_cross <= 1e-10 * scale)
      throw ValidationError("surface tangents are linearly dependent somewhere on the cell");
    Eigen::Matrix2d I = effective_metric();
    if (!(I(0, 0) > 0) || !(I.determinant() > 0))
      throw ValidationError("effective metric is not positive definite");
  }

  UnitCell cell_;
  Eigen::Vector3d p1_, p2_;
  VectorField xtilde_, xu_, xv_;
};

namespace detail {

// c = a ^ b pointwise on matching grids.
inline void cross_into(const Eigen::MatrixXd* a, const Eigen::MatrixXd* b, Eigen::MatrixXd* c,
                       double sign) {
  c[0] += sign * (a[1].cwiseProduct(b[2]) - a[2].cwiseProduct(b[1]));
  c[1] += sign * (a[2].cwiseProduct(b[0]) - a[0].cwiseProduct(b[2]));
  c[2] += sign * (a[0].cwiseProduct(b[1]) - a[1].cwiseProduct(b[0]));
}

}  // namespace detail

class DarbouxOperator {
 public:
  explicit DarbouxOperator(const PeriodicSurface& x) : x_(x), cell_(x.cell()) {
    const int M1 = detail::fine_size(cell_.N1), M2 = detail::fine_size(cell_.N2);
    for (int c = 0; c < 3; ++c) {
      xu_fine_[c] = detail::idft2(
          detail::pad_spectrum(detail::dft2(x.tangent_u().comp(c)), M1, M2));
      xv_fine_[c] = detail::idft2(
          detail::pad_spectrum(detail::dft2(x.tangent_v().comp(c)), M1, M2));
    }
  }

  const PeriodicSurface& surface() const { return x_; }
  const UnitCell& cell() const { return cell_; }

  /// D_x w = w_v ^ x_u - w_u ^ x_v with de-aliased products.
  VectorField apply(const VectorField& w) const {
    if (!(w.cell() == cell_)) throw ValidationError("unit cell mismatch");
    const int M1 = detail::fine_size(cell_.N1), M2 = detail::fine_size(cell_.N2);
    Eigen::MatrixXd wu[3], wv[3];
    for (int c = 0; c < 3; ++c) {
      auto F = detail::dft2(w.comp(c));
      detail::zero_nyquist(F);
      wu[c] = detail::idft2(detail::pad_spectrum(
          detail::deriv_spectrum(F, Dir::U, 1, cell_.L1, cell_.L2), M1, M2));
      wv[c] = detail::idft2(detail::pad_spectrum(
          detail::deriv_spectrum(F, Dir::V, 1, cell_.L1, cell_.L2), M1, M2));
    }
    Eigen::MatrixXd out[3];
    for (auto& m : out) m = Eigen::MatrixXd::Zero(M1, M2);
    detail::cross_into(wv, xu_fine_, out, 1.0);
    detail::cross_into(wu, xv_fine_, out, -1.0);
    VectorField r = VectorField::zero(cell_);
    for (int c = 0; c < 3; ++c)
      r.comp(c) = detail::idft2(detail::truncate_spectrum(detail::dft2(out[c]), cell_.N1, cell_.N2));
    return r;
  }

  struct Factorization {
    BandBasis basis;
    double symmetry_defect;
    SymmetricEigen eig;  // on the zero-mean 3-component band space
    double sigma_max;
  };

  const Factorization& factorization() const {
    std::call_once(cache_->once, [this] { cache_->fact = std::make_unique<Factorization>(assemble()); });
    return *cache_->fact;
  }

  /// Coefficients of a zero-mean vector field on the stacked band basis.
  Eigen::VectorXd coefficients(const VectorField& w, const BandBasis& basis) const {
    const int m = basis.size();
    Eigen::VectorXd c(3 * (m - 1));
    for (int comp = 0; comp < 3; ++comp)
      c.segment(comp * (m - 1), m - 1) = basis.coefficients(w.component(comp)).tail(m - 1);
    return c;
  }

  VectorField synthesize(const Eigen::VectorXd& c, const BandBasis& basis) const {
    const int m = basis.size();
    VectorField w = VectorField::zero(cell_);
    for (int comp = 0; comp < 3; ++comp) {
      Eigen::VectorXd full = Eigen::VectorXd::Zero(m);
      full.tail(m - 1) = c.segment(comp * (m - 1), m - 1);
      w.comp(comp) = basis.synthesize(full).samples();
    }
    return w;
  }

 private:
  Factorization assemble() const {
    BandBasis basis(cell_);
    const int m = basis.size();
    const int n = 3 * (m - 1);
    Eigen::MatrixXd A(n, n);
    for (int comp = 0; comp < 3; ++comp)
      for (int beta = 1; beta < m; ++beta) {
        VectorField w = VectorField::zero(cell_);
        w.comp(comp) = basis.field(beta).samples();
        A.col(comp * (m - 1) + (beta - 1)) = coefficients(apply(w), basis);
      }
    const double defect = (A - A.transpose()).cwiseAbs().maxCoeff();
    A = 0.5 * (A + A.transpose()).eval();
    auto eig = eigen_sym(A);
    const double sigma =
        eig.values.size() ? std::max(std::abs(eig.values(0)), std::abs(eig.values(eig.values.size() - 1)))
                          : 0.0;
    return {std::move(basis), defect, std::move(eig), sigma};
  }

  PeriodicSurface x_;
  UnitCell cell_;
  Eigen::MatrixXd xu_fine_[3], xv_fine_[3];

  struct Cache {
    std::once_flag once;
    std::unique_ptr<Factorization> fact;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// |<omega, D_x w> - <w, D_x omega>|, the Lemma-5 self-adjointness defect.
inline double darboux_defect(const DarbouxOperator& op, const VectorField& omega,
                             const VectorField& w) {
  return std::abs(inner(omega, op.apply(w)) - inner(w, op.apply(omega)));
}

/// Support-vector velocities of a rotation field: pdot_mu = mean(w ^ x_mu).
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> support_velocities(const PeriodicSurface& x,
                                                                      const VectorField& w) {
  Eigen::Vector3d p1dot = Eigen::Vector3d::Zero(), p2dot = Eigen::Vector3d::Zero();
  const auto& c = x.cell();
  for (int i = 0; i < c.N1; ++i)
    for (int j = 0; j < c.N2; ++j) {
      const Eigen::Vector3d wv = w.at(i, j);
      p1dot += wv.cross(x.tangent_u().at(i, j));
      p2dot += wv.cross(x.tangent_v().at(i, j));
    }
  return {p1dot / c.samples(), p2dot / c.samples()};
}

inline EffectiveStrain strain_from_velocities(const PeriodicSurface& x, const Eigen::Vector3d& p1dot,
                                              const Eigen::Vector3d& p2dot) {
  EffectiveStrain E;
  E.E11 = p1dot.dot(x.p1());
  E.E22 = p2dot.dot(x.p2());
  E.E12 = 0.5 * (p1dot.dot(x.p2()) + p2dot.dot(x.p1()));
  return E;
}

struct SurfaceMode {
  VectorField w;  // unit mean-value norm rotation field
  Eigen::Vector3d p1dot, p2dot;
  EffectiveStrain E;
  bool silent = false;
};

struct SurfaceModes {
  std::vector<SurfaceMode> modes;  // strain carriers first
  int trivial_dim = 3;             // constant rotation fields, always present
  int kernel_dim = 0;              // nontrivial kernel dimension found numerically
  double sigma_max = 0;
};

/// Kernel of D_x among zero-mean periodic vector fields, rotated into
/// strain-principal form (carriers first, silent modes after); the
/// constant fields are the trivial rigid rotations and are reported only
/// through trivial_dim.
inline SurfaceModes periodic_modes(const DarbouxOperator& op, double rank_tol = 1e-8) {
  detail::check_rank_tol(rank_tol);
  const auto& f = op.factorization();
  SurfaceModes out;
  out.sigma_max = f.sigma_max;
  const int n = static_cast<int>(f.eig.values.size());
  std::vector<int> idx;
  for (int i = 0; i < n; ++i)
    if (std::abs(f.eig.values(i)) <= rank_tol * f.sigma_max) idx.push_back(i);
  out.kernel_dim = static_cast<int>(idx.size());
  if (idx.empty()) return out;

  const int K = static_cast<int>(idx.size());
  Eigen::MatrixXd V(n, K);
  for (int k = 0; k < K; ++k) V.col(k) = f.eig.vectors.col(idx[k]);

  const PeriodicSurface& x = op.surface();
  Eigen::MatrixXd S(3, K);
  for (int k = 0; k < K; ++k) {
    const VectorField w = op.synthesize(V.col(k), f.basis);
    const auto [p1dot, p2dot] = support_velocities(x, w);
    const EffectiveStrain E = strain_from_velocities(x, p1dot, p2dot);
    S.col(k) << E.E11, E.E22, std::sqrt(2.0) * E.E12;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeFullV);
  V = (V * svd.matrixV()).eval();

  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd col = V.col(k);
    detail::canonicalize_sign(col);
    SurfaceMode mode;
    mode.w = op.synthesize(col, f.basis);
    std::tie(mode.p1dot, mode.p2dot) = support_velocities(x, mode.w);
    mode.E = strain_from_velocities(x, mode.p1dot, mode.p2dot);
    mode.silent = mode.E.norm() <= rank_tol;
    if (mode.E.E22 < mode.E.E11) {
      mode.w = -1.0 * mode.w;
      mode.p1dot = -mode.p1dot;
      mode.p2dot = -mode.p2dot;
      mode.E = {-mode.E.E11, -mode.E.E22, -mode.E.E12};
    }
    out.modes.push_back(std::move(mode));
  }
  return out;
}

/// Pointwise least-squares extraction of the rotation field w from the
/// deflection gradients: solves w ^ x_u = xdot_u, w ^ x_v = xdot_v at
/// every sample (6 equations, 3 unknowns).
inline VectorField rotation_from_deflection(const PeriodicSurface& x, const VectorField& xdot_u,
                                            const VectorField& xdot_v) {
  const auto& c = x.cell();
  VectorField w = VectorField::zero(c);
  auto cross_matrix = [](const Eigen::Vector3d& a) {
    Eigen::Matrix3d M;
    M << 0, a.z(), -a.y(), -a.z(), 0, a.x(), a.y(), -a.x(), 0;  // M v = v ^ a
    return M;
  };
  for (int i = 0; i < c.N1; ++i)
    for (int j = 0; j < c.N2; ++j) {
      Eigen::Matrix<double, 6, 3> A;
      A.topRows<3>() = cross_matrix(x.tangent_u().at(i, j));
      A.bottomRows<3>() = cross_matrix(x.tangent_v().at(i, j));
      Eigen::Matrix<double, 6, 1> b;
      b.head<3>() = xdot_u.at(i, j);
      b.tail<3>() = xdot_v.at(i, j);
      const Eigen::Vector3d wij = A.colPivHouseholderQr().solve(b);
      for (int comp = 0; comp < 3; ++comp) w.comp(comp)(i, j) = wij(comp);
    }
  return w;
}

// ---------------------------------------------------------------------------
// One-parameter families of isometric unit cells and their calibration.

struct FamilySample {
  double t = 0;
  Eigen::Vector3d p1 = Eigen::Vector3d::Zero(), p2 = Eigen::Vector3d::Zero();
};

class ModeFamily {
 public:
  /// Family of smooth surfaces; consecutive samples must be isometric
  /// (pointwise metric mismatch at most family_tol).
  static ModeFamily from_surfaces(const std::vector<double>& ts,
                                  const std::vector<PeriodicSurface>& surfaces,
                                  double family_tol = 1e-6) {
    if (ts.size() != surfaces.size()) throw ValidationError("family sample count mismatch");
    ModeFamily fam;
    for (size_t i = 0; i < ts.size(); ++i) {
      if (i > 0) {
        if (!(ts[i] > ts[i - 1])) throw ValidationError("family parameters must increase strictly");
        const auto ga = surfaces[i - 1].metric_samples();
        const auto gb = surfaces[i].metric_samples();
        double mismatch = 0;
        for (int cpt = 0; cpt < 3; ++cpt)
          mismatch = std::max(mismatch, (ga[cpt] - gb[cpt]).cwiseAbs().maxCoeff());
        if (mismatch > family_tol)
          throw ValidationError("family samples " + std::to_string(i - 1) + " and " +
                                std::to_string(i) + " are not isometric (metric mismatch " +
                                std::to_string(mismatch) + ")");
      }
      fam.samples_.push_back({ts[i], surfaces[i].p1(), surfaces[i].p2()});
    }
    return fam;
  }

  /// Abstract calibration input: support vectors only, no isometry check.
  static ModeFamily from_supports(std::vector<FamilySample> samples) {
    for (size_t i = 1; i < samples.size(); ++i)
      if (!(samples[i].t > samples[i - 1].t))
        throw ValidationError("family parameters must increase strictly");
    ModeFamily fam;
    fam.samples_ = std::move(samples);
    return fam;
  }

  const std::vector<FamilySample>& samples() const { return samples_; }
  size_t size() const { return samples_.size(); }

 private:
  std::vector<FamilySample> samples_;
};

struct CalibrationRow {
  double t = 0;
  Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d E = Eigen::Matrix2d::Zero();  // Idot/2 by finite differences
  double nu = 0;
  bool nu_degenerate = false;
  int det_sign = 0;
  PdeType type = PdeType::Parabolic;
};

enum class DiffScheme { Central, Richardson };

namespace detail {

// Derivative weights for three abscissae, evaluated at one of them.
inline Eigen::Matrix2d three_point_derivative(const Eigen::Matrix2d& f0, const Eigen::Matrix2d& f1,
                                              const Eigen::Matrix2d& f2, double x0, double x1,
                                              double x2, double at) {
  // Lagrange derivative weights.
  const double d0 = (2 * at - x1 - x2) / ((x0 - x1) * (x0 - x2));
  const double d1 = (2 * at - x0 - x2) / ((x1 - x0) * (x1 - x2));
  const double d2 = (2 * at - x0 - x1) / ((x2 - x0) * (x2 - x1));
  return d0 * f0 + d1 * f1 + d2 * f2;
}

}  // namespace detail

/// Calibration table t -> {I(t), E(t) = Idot/2, nu, det sign, PDE type}.
/// E uses central differences (second-order one-sided at the ends);
/// Richardson extrapolation combines the h and 2h central stencils where
/// five uniform samples are available.
inline std::vector<CalibrationRow> family_calibration(const ModeFamily& fam,
                                                      DiffScheme scheme = DiffScheme::Central) {
  const auto& s = fam.samples();
  const int n = static_cast<int>(s.size());
  if (n < 3) throw ValidationError("family calibration needs at least 3 samples");

  std::vector<Eigen::Matrix2d> I(n);
  for (int i = 0; i < n; ++i) {
    I[i] << s[i].p1.dot(s[i].p1), s[i].p1.dot(s[i].p2), s[i].p1.dot(s[i].p2), s[i].p2.dot(s[i].p2);
  }

  std::vector<CalibrationRow> rows(n);
  for (int i = 0; i < n; ++i) {
    const int a = std::clamp(i - 1, 0, n - 3);
    Eigen::Matrix2d Idot = detail::three_point_derivative(I[a], I[a + 1], I[a + 2], s[a].t,
                                                          s[a + 1].t, s[a + 2].t, s[i].t);
    if (scheme == DiffScheme::Richardson && i >= 2 && i <= n - 3) {
      const double h1 = s[i + 1].t - s[i].t, h2 = s[i + 2].t - s[i].t;
      if (std::abs(h2 - 2 * h1) < 1e-12 * std::abs(h1)) {
        const Eigen::Matrix2d Dh = (I[i + 1] - I[i - 1]) / (2 * h1);
        const Eigen::Matrix2d D2h = (I[i + 2] - I[i - 2]) / (4 * h1);
        Idot = (4.0 * Dh - D2h) / 3.0;
      }
    }
    CalibrationRow& r = rows[i];
    r.t = s[i].t;
    r.I = I[i];
    r.E = 0.5 * Idot;
    const EffectiveStrain E = EffectiveStrain::from_matrix(r.E);
    const auto pr = poisson_ratio(E);
    r.nu = pr.nu;
    r.nu_degenerate = pr.degenerate;
    const double d = E.det();
    const double tol = 1e-12 * E.norm() * E.norm();
    r.det_sign = d > tol ? 1 : (d < -tol ? -1 : 0);
    r.type = classify(E);
  }
  return rows;
}

/// CSV emission with the fixed header
/// t,I11,I12,I22,E11,E12,E22,nu,det_sign,type.
inline void calibration_csv(const std::vector<CalibrationRow>& rows, std::ostream& os) {
  os << "t,I11,I12,I22,E11,E12,E22,nu,det_sign,type\n";
  auto num = [](double x) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
  };
  for (const auto& r : rows) {
    os << num(r.t) << ',' << num(r.I(0, 0)) << ',' << num(r.I(0, 1)) << ',' << num(r.I(1, 1))
       << ',' << num(r.E(0, 0)) << ',' << num(r.E(0, 1)) << ',' << num(r.E(1, 1)) << ','
       << (r.nu_degenerate ? std::string("degenerate") : num(r.nu)) << ',' << r.det_sign << ','
       << to_string(r.type) << '\n';
  }
}

}  // namespace isoshell
