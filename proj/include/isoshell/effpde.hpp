#pragma once

// Homogenized effective-surface PDE
//     E22(theta) Y_UU + E11(theta) Y_VV - 2 E12(theta) Y_UV = 0
// solved componentwise for Y: Omega -> R^3 on a rectangular macroscopic
// grid, with the metric constraint <Y_M, Y_N> = I(theta) handled by
// Picard iteration over a calibration table. The PDE type follows the
// sign of det E: elliptic solves take Dirichlet data on the full contour,
// hyperbolic ones march from Cauchy data on the U = 0 edge.

#include <isoshell/errors.hpp>
#include <isoshell/forms.hpp>
#include <isoshell/surface.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <charconv>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

namespace isoshell {

struct MacroGrid {
  int M1 = 33, M2 = 33;      // grid nodes
  double H1 = 0.03125, H2 = 0.03125;  // spacings

  MacroGrid() = default;
  MacroGrid(int M1, int M2, double H1, double H2) : M1(M1), M2(M2), H1(H1), H2(H2) {
    if (M1 < 3 || M2 < 3) throw ValidationError("macroscopic grid needs at least 3 nodes per side");
    if (!(H1 > 0) || !(H2 > 0)) throw ValidationError("grid spacings must be positive");
  }

  double U(int i) const { return i * H1; }
  double V(int j) const { return j * H2; }
};

enum class SolveStatus { Converged, MaxIterations, TypeChange };

struct EffectiveSurface {
  MacroGrid grid;
  std::array<Eigen::MatrixXd, 3> Y;
  Eigen::MatrixXd theta;       // empty unless produced by the quasilinear solver
  Eigen::MatrixXd misfit;      // pointwise metric misfit of the last Picard update
  double interior_residual = 0;  // max abs PDE residual on interior nodes
  PdeType type = PdeType::Elliptic;
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;
  Eigen::Matrix2d frame = Eigen::Matrix2d::Identity();  // principal frame used, if any

  bool has_theta() const { return theta.size() > 0; }
};

struct BoundaryData {
  /// Y on the contour (elliptic) or on the whole closure (hyperbolic
  /// lateral edges are read from it as the march advances).
  std::function<Eigen::Vector3d(double, double)> value;
  /// dY/dU on the U = 0 edge; required by the hyperbolic march only.
  std::function<Eigen::Vector3d(double, double)> normal_derivative;
};

namespace detail {

using StrainField = std::function<EffectiveStrain(int, int)>;

// Centered interior residual of the effective PDE, max over components.
inline double interior_residual(const MacroGrid& g, const std::array<Eigen::MatrixXd, 3>& Y,
                                const StrainField& E) {
  double worst = 0;
  for (int i = 1; i < g.M1 - 1; ++i)
    for (int j = 1; j < g.M2 - 1; ++j) {
      const EffectiveStrain e = E(i, j);
      for (int c = 0; c < 3; ++c) {
        const auto& y = Y[c];
        const double r =
            e.E22 * (y(i + 1, j) - 2 * y(i, j) + y(i - 1, j)) / (g.H1 * g.H1) +
            e.E11 * (y(i, j + 1) - 2 * y(i, j) + y(i, j - 1)) / (g.H2 * g.H2) -
            2 * e.E12 *
                (y(i + 1, j + 1) + y(i - 1, j - 1) - y(i + 1, j - 1) - y(i - 1, j + 1)) /
                (4 * g.H1 * g.H2);
        worst = std::max(worst, std::abs(r));
      }
    }
  return worst;
}

inline std::array<Eigen::MatrixXd, 3> solve_elliptic(const MacroGrid& g, const StrainField& E,
                                                     const BoundaryData& bc) {
  const int n1 = g.M1 - 2, n2 = g.M2 - 2;
  const int n = n1 * n2;
  auto id = [&](int i, int j) { return (i - 1) * n2 + (j - 1); };

  std::array<Eigen::MatrixXd, 3> Y;
  for (auto& y : Y) y = Eigen::MatrixXd::Zero(g.M1, g.M2);
  for (int i = 0; i < g.M1; ++i)
    for (int j = 0; j < g.M2; ++j)
      if (i == 0 || j == 0 || i == g.M1 - 1 || j == g.M2 - 1) {
        const Eigen::Vector3d v = bc.value(g.U(i), g.V(j));
        for (int c = 0; c < 3; ++c) Y[c](i, j) = v(c);
      }

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
  for (int i = 1; i <= n1; ++i)
    for (int j = 1; j <= n2; ++j) {
      const EffectiveStrain e = E(i, j);
      const double cu = e.E22 / (g.H1 * g.H1);
      const double cv = e.E11 / (g.H2 * g.H2);
      const double cx = -2 * e.E12 / (4 * g.H1 * g.H2);
      const int row = id(i, j);
      auto add = [&](int ii, int jj, double w) {
        if (w == 0.0) return;
        if (ii == 0 || jj == 0 || ii == g.M1 - 1 || jj == g.M2 - 1) {
          for (int c = 0; c < 3; ++c) rhs(row, c) -= w * Y[c](ii, jj);
        } else {
          trip.emplace_back(row, id(ii, jj), w);
        }
      };
      add(i, j, -2 * cu - 2 * cv);
      add(i + 1, j, cu);
      add(i - 1, j, cu);
      add(i, j + 1, cv);
      add(i, j - 1, cv);
      add(i + 1, j + 1, cx);
      add(i - 1, j - 1, cx);
      add(i + 1, j - 1, -cx);
      add(i - 1, j + 1, -cx);
    }

  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success)
    throw NumericError("elliptic stencil factorization failed (indefinite or singular)");
  for (int c = 0; c < 3; ++c) {
    const Eigen::VectorXd x = lu.solve(rhs.col(c));
    for (int i = 1; i <= n1; ++i)
      for (int j = 1; j <= n2; ++j) Y[c](i, j) = x(id(i, j));
  }
  return Y;
}

inline std::array<Eigen::MatrixXd, 3> solve_hyperbolic(const MacroGrid& g, const StrainField& E,
                                                       const BoundaryData& bc) {
  if (!bc.normal_derivative)
    throw ValidationError("hyperbolic solve needs Cauchy data: values and normal derivative");
  // Marching along U requires a shear-free strain; callers rotate to the
  // principal frame first.
  double cfl = 0;
  for (int i = 0; i < g.M1; ++i)
    for (int j = 0; j < g.M2; ++j) {
      const EffectiveStrain e = E(i, j);
      if (std::abs(e.E12) > 1e-10 * std::max(1.0, e.norm()))
        throw NumericError("hyperbolic march requires principal-frame (shear-free) strain");
      if (std::abs(e.E22) <= 1e-14 * std::max(1.0, e.norm()))
        throw NumericError("Cauchy edge U = 0 is characteristic (E22 vanishes)");
      const double c2 = -e.E11 / e.E22;
      if (!(c2 > 0)) throw NumericError("strain is not hyperbolic at a grid node");
      cfl = std::max(cfl, std::sqrt(c2) * g.H1 / g.H2);
    }
  if (cfl > 1.0 + 1e-12)
    throw NumericError("explicit march violates the CFL-like ratio c H1/H2 <= 1 (got " +
                       std::to_string(cfl) + ")");

  std::array<Eigen::MatrixXd, 3> Y;
  for (auto& y : Y) y = Eigen::MatrixXd::Zero(g.M1, g.M2);

  auto set_row_boundary = [&](int i) {
    for (int j : {0, g.M2 - 1}) {
      const Eigen::Vector3d v = bc.value(g.U(i), g.V(j));
      for (int c = 0; c < 3; ++c) Y[c](i, j) = v(c);
    }
  };

  for (int j = 0; j < g.M2; ++j) {
    const Eigen::Vector3d v = bc.value(0.0, g.V(j));
    for (int c = 0; c < 3; ++c) Y[c](0, j) = v(c);
  }
  // Second-order Taylor start: Y_UU from the PDE itself.
  set_row_boundary(1);
  for (int j = 1; j < g.M2 - 1; ++j) {
    const EffectiveStrain e = E(0, j);
    const double c2 = -e.E11 / e.E22;
    const Eigen::Vector3d d = bc.normal_derivative(0.0, g.V(j));
    for (int c = 0; c < 3; ++c) {
      const double yvv = (Y[c](0, j + 1) - 2 * Y[c](0, j) + Y[c](0, j - 1)) / (g.H2 * g.H2);
      Y[c](1, j) = Y[c](0, j) + g.H1 * d(c) + 0.5 * g.H1 * g.H1 * c2 * yvv;
    }
  }
  for (int i = 2; i < g.M1; ++i) {
    set_row_boundary(i);
    for (int j = 1; j < g.M2 - 1; ++j) {
      const EffectiveStrain e = E(i - 1, j);
      const double c2 = -e.E11 / e.E22;
      for (int c = 0; c < 3; ++c) {
        const double yvv =
            (Y[c](i - 1, j + 1) - 2 * Y[c](i - 1, j) + Y[c](i - 1, j - 1)) / (g.H2 * g.H2);
        Y[c](i, j) = 2 * Y[c](i - 1, j) - Y[c](i - 2, j) + g.H1 * g.H1 * c2 * yvv;
      }
    }
  }
  return Y;
}

}  // namespace detail

/// Linear effective-surface solve with constant strain. Elliptic strains
/// take Dirichlet data on the contour; hyperbolic ones march from Cauchy
/// data on the U = 0 edge (rotating to the principal frame first when the
/// strain carries shear; the grid coordinates are then principal-frame
/// coordinates and the rotation is recorded in the result). Parabolic
/// strains are rejected.
inline EffectiveSurface solve_linear_effective(const EffectiveStrain& E, const MacroGrid& grid,
                                               const BoundaryData& bc) {
  EffectiveSurface out;
  out.grid = grid;
  out.type = classify(E);
  if (out.type == PdeType::Parabolic)
    throw NumericError("parabolic strain (det E = 0): cylindrical bending is not solved");

  EffectiveStrain Es = E;
  if (out.type == PdeType::Hyperbolic && std::abs(E.E12) > 1e-14 * std::max(1.0, E.norm())) {
    const auto pr = poisson_ratio(E);
    const Eigen::Matrix2d R = pr.principal_dirs;
    const Eigen::Matrix2d Ep = R.transpose() * E.matrix() * R;
    Es = EffectiveStrain::from_matrix(Ep);
    out.frame = R;
  }
  detail::StrainField field = [Es](int, int) { return Es; };
  out.Y = out.type == PdeType::Elliptic ? detail::solve_elliptic(grid, field, bc)
                                        : detail::solve_hyperbolic(grid, field, bc);
  out.interior_residual = detail::interior_residual(grid, out.Y, field);
  return out;
}

// ---------------------------------------------------------------------------
// Calibration tables and the quasilinear Picard solver.

struct TableRow {
  double t = 0;
  Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d E = Eigen::Matrix2d::Zero();
};

class CalibrationTable {
 public:
  explicit CalibrationTable(std::vector<TableRow> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw ValidationError("calibration table is empty");
    for (size_t i = 0; i < rows_.size(); ++i) {
      if (i > 0 && !(rows_[i].t > rows_[i - 1].t))
        throw ValidationError("calibration table parameters must increase strictly");
      if (!(rows_[i].I(0, 0) > 0) || !(rows_[i].I.determinant() > 0))
        throw ValidationError("calibration table metric is not positive definite at t = " +
                              std::to_string(rows_[i].t));
    }
  }

  static CalibrationTable from_calibration(const std::vector<CalibrationRow>& rows) {
    std::vector<TableRow> t;
    for (const auto& r : rows) t.push_back({r.t, r.I, r.E});
    return CalibrationTable(std::move(t));
  }

  const std::vector<TableRow>& rows() const { return rows_; }
  double t_min() const { return rows_.front().t; }
  double t_max() const { return rows_.back().t; }
  bool single_row() const { return rows_.size() == 1; }

  Eigen::Matrix2d I_at(double t) const { return interp(t, &TableRow::I); }
  Eigen::Matrix2d E_at(double t) const { return interp(t, &TableRow::E); }

  /// Parameter whose metric best fits Idisc in the Frobenius norm. The
  /// interpolant is piecewise linear, so the misfit is quadratic on each
  /// interval and minimized in closed form; the global minimum over
  /// intervals is returned (ties resolve to the smaller parameter).
  double fit_theta(const Eigen::Matrix2d& Idisc) const {
    if (rows_.size() == 1) return rows_[0].t;
    double best_t = rows_[0].t;
    double best = (Idisc - rows_[0].I).squaredNorm();
    for (size_t k = 0; k + 1 < rows_.size(); ++k) {
      const Eigen::Matrix2d D = rows_[k + 1].I - rows_[k].I;
      const double dd = D.squaredNorm();
      double s = 0;
      if (dd > 0) s = std::clamp((Idisc - rows_[k].I).cwiseProduct(D).sum() / dd, 0.0, 1.0);
      const double misfit = (Idisc - rows_[k].I - s * D).squaredNorm();
      if (misfit < best) {  // strict: ties resolve to the smaller parameter
        best = misfit;
        best_t = rows_[k].t + s * (rows_[k + 1].t - rows_[k].t);
      }
    }
    return best_t;
  }

 private:
  template <class Member>
  Eigen::Matrix2d interp(double t, Member m) const {
    if (t <= rows_.front().t) return rows_.front().*m;
    if (t >= rows_.back().t) return rows_.back().*m;
    size_t k = 0;
    while (k + 2 < rows_.size() && rows_[k + 1].t <= t) ++k;
    const double s = (t - rows_[k].t) / (rows_[k + 1].t - rows_[k].t);
    return (1 - s) * (rows_[k].*m) + s * (rows_[k + 1].*m);
  }

  std::vector<TableRow> rows_;
};

struct PicardOptions {
  double theta_init = 0;
  int max_iter = 50;
  double fp_tol = 1e-10;
};

namespace detail {

// Discrete first fundamental form of Y at a node (centered differences,
// one-sided at the domain edges).
inline Eigen::Matrix2d discrete_metric(const MacroGrid& g, const std::array<Eigen::MatrixXd, 3>& Y,
                                       int i, int j) {
  Eigen::Vector3d Yu, Yv;
  for (int c = 0; c < 3; ++c) {
    const auto& y = Y[c];
    if (i == 0)
      Yu(c) = (-3 * y(0, j) + 4 * y(1, j) - y(2, j)) / (2 * g.H1);
    else if (i == g.M1 - 1)
      Yu(c) = (3 * y(i, j) - 4 * y(i - 1, j) + y(i - 2, j)) / (2 * g.H1);
    else
      Yu(c) = (y(i + 1, j) - y(i - 1, j)) / (2 * g.H1);
    if (j == 0)
      Yv(c) = (-3 * y(i, 0) + 4 * y(i, 1) - y(i, 2)) / (2 * g.H2);
    else if (j == g.M2 - 1)
      Yv(c) = (3 * y(i, j) - 4 * y(i, j - 1) + y(i, j - 2)) / (2 * g.H2);
    else
      Yv(c) = (y(i, j + 1) - y(i, j - 1)) / (2 * g.H2);
  }
  Eigen::Matrix2d I;
  I << Yu.dot(Yu), Yu.dot(Yv), Yu.dot(Yv), Yv.dot(Yv);
  return I;
}

}  // namespace detail

/// Picard (frozen-coefficient) iteration for the quasilinear effective
/// problem: solve the PDE with E(theta) pointwise, refit theta from the
/// discrete metric of the solution, repeat. Best-effort: non-convergence
/// and PDE type changes are reported in the result status, not thrown.
inline EffectiveSurface picard_quasilinear(const CalibrationTable& table, const MacroGrid& grid,
                                           const BoundaryData& bc, const PicardOptions& opts) {
  if (opts.theta_init < table.t_min() || opts.theta_init > table.t_max())
    throw ValidationError("theta_init lies outside the calibration table range");
  if (opts.max_iter < 1) throw ValidationError("max_iter must be positive");

  // Approximate boundary-compatibility check: the tangential metric of
  // the boundary data must be attainable within the table, up to a
  // generous factor.
  {
    double lo11 = 1e300, hi11 = -1e300, lo22 = 1e300, hi22 = -1e300;
    for (const auto& r : table.rows()) {
      lo11 = std::min(lo11, r.I(0, 0));
      hi11 = std::max(hi11, r.I(0, 0));
      lo22 = std::min(lo22, r.I(1, 1));
      hi22 = std::max(hi22, r.I(1, 1));
    }
    auto g_tangent = [&](double U0, double V0, double dU, double dV) {
      const double h = 1e-5;
      const Eigen::Vector3d d =
          (bc.value(U0 + h * dU, V0 + h * dV) - bc.value(U0 - h * dU, V0 - h * dV)) / (2 * h);
      return d.squaredNorm();
    };
    const double Umax = grid.U(grid.M1 - 1), Vmax = grid.V(grid.M2 - 1);
    for (int k = 1; k < 8; ++k) {
      const double s = k / 8.0;
      const double g22a = g_tangent(0.0, s * Vmax, 0, 1), g22b = g_tangent(Umax, s * Vmax, 0, 1);
      const double g11a = g_tangent(s * Umax, 0.0, 1, 0), g11b = g_tangent(s * Umax, Vmax, 1, 0);
      if (std::max(g22a, g22b) > 4 * hi22 || std::min(g22a, g22b) < lo22 / 4 ||
          std::max(g11a, g11b) > 4 * hi11 || std::min(g11a, g11b) < lo11 / 4)
        throw NumericError("boundary data metric is outside the calibration range");
    }
  }

  EffectiveSurface out;
  out.grid = grid;
  out.theta = Eigen::MatrixXd::Constant(grid.M1, grid.M2, opts.theta_init);
  out.misfit = Eigen::MatrixXd::Zero(grid.M1, grid.M2);

  for (int it = 1; it <= opts.max_iter; ++it) {
    out.iterations = it;

    // Freeze theta, classify, solve.
    bool any_ell = false, any_hyp = false, any_par = false;
    for (int i = 0; i < grid.M1; ++i)
      for (int j = 0; j < grid.M2; ++j) {
        const auto t = classify(EffectiveStrain::from_matrix(table.E_at(out.theta(i, j))));
        any_ell |= t == PdeType::Elliptic;
        any_hyp |= t == PdeType::Hyperbolic;
        any_par |= t == PdeType::Parabolic;
      }
    if (any_par || (any_ell && any_hyp)) {
      out.status = SolveStatus::TypeChange;
      return out;
    }
    out.type = any_ell ? PdeType::Elliptic : PdeType::Hyperbolic;
    detail::StrainField field = [&](int i, int j) {
      return EffectiveStrain::from_matrix(table.E_at(out.theta(i, j)));
    };
    out.Y = out.type == PdeType::Elliptic ? detail::solve_elliptic(grid, field, bc)
                                          : detail::solve_hyperbolic(grid, field, bc);

    // Refit theta pointwise from the discrete metric.
    double dtheta = 0;
    for (int i = 0; i < grid.M1; ++i)
      for (int j = 0; j < grid.M2; ++j) {
        const Eigen::Matrix2d Id = detail::discrete_metric(grid, out.Y, i, j);
        const double t = table.fit_theta(Id);
        dtheta = std::max(dtheta, std::abs(t - out.theta(i, j)));
        out.misfit(i, j) = (Id - table.I_at(t)).norm();
        out.theta(i, j) = t;
      }

    out.interior_residual = detail::interior_residual(grid, out.Y, field);
    if (dtheta <= opts.fp_tol) {
      out.status = SolveStatus::Converged;
      return out;
    }
  }
  out.status = SolveStatus::MaxIterations;
  return out;
}

/// CSV emission: header U,V,Yx,Yy,Yz,theta, one row per node, row-major.
inline void effective_surface_csv(const EffectiveSurface& s, std::ostream& os) {
  os << "U,V,Yx,Yy,Yz,theta\n";
  auto num = [](double x) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
  };
  for (int i = 0; i < s.grid.M1; ++i)
    for (int j = 0; j < s.grid.M2; ++j) {
      os << num(s.grid.U(i)) << ',' << num(s.grid.V(j)) << ',' << num(s.Y[0](i, j)) << ','
         << num(s.Y[1](i, j)) << ',' << num(s.Y[2](i, j)) << ','
         << (s.has_theta() ? num(s.theta(i, j)) : std::string()) << '\n';
    }
}

}  // namespace isoshell
