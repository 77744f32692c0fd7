#pragma once

// Periodic rectangular unit-cell grid with trigonometric-spectral
// differentiation, mean-value integration and inner products.
//
// Sampling convention: a field on cell (L1, L2, N1, N2) stores an
// N1 x N2 matrix with entry (i, j) taken at (i*L1/N1, j*L2/N2); row
// index runs along u, column index along v.
//
// Band-limit discipline: fields produced by the library keep modes
// |k| <= N/2 - 1 only. Differentiation zeroes the Nyquist mode and
// products of fields are de-aliased on a 3/2 zero-padded grid, then
// truncated back to the strict band. Means and inner products of two
// strict-band fields are exact for trigonometric polynomials.

#include <isoshell/errors.hpp>
#include <isoshell/expr.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <array>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

namespace isoshell {

struct UnitCell {
  double L1 = 2 * EIGEN_PI;
  double L2 = 2 * EIGEN_PI;
  int N1 = 32;
  int N2 = 32;

  UnitCell() = default;
  UnitCell(double L1, double L2, int N1, int N2) : L1(L1), L2(L2), N1(N1), N2(N2) {
    if (!(L1 > 0) || !(L2 > 0)) throw ValidationError("unit cell periods must be positive");
    if (N1 < 8 || N2 < 8) throw ValidationError("unit cell resolution must be at least 8");
    if (N1 % 2 || N2 % 2) throw ValidationError("unit cell resolution must be even");
  }

  bool operator==(const UnitCell&) const = default;

  double u(int i) const { return i * L1 / N1; }
  double v(int j) const { return j * L2 / N2; }
  int samples() const { return N1 * N2; }
};

enum class Dir { U, V };

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(const UnitCell& cell, Eigen::MatrixXd samples) : cell_(cell), s_(std::move(samples)) {
    if (s_.rows() != cell_.N1 || s_.cols() != cell_.N2)
      throw ValidationError("field sample shape does not match cell resolution");
  }

  static ScalarField zero(const UnitCell& cell) {
    return ScalarField(cell, Eigen::MatrixXd::Zero(cell.N1, cell.N2));
  }
  static ScalarField constant(const UnitCell& cell, double value) {
    return ScalarField(cell, Eigen::MatrixXd::Constant(cell.N1, cell.N2, value));
  }

  const UnitCell& cell() const { return cell_; }
  const Eigen::MatrixXd& samples() const { return s_; }
  double operator()(int i, int j) const { return s_(i, j); }
  double max_abs() const { return s_.size() ? s_.cwiseAbs().maxCoeff() : 0.0; }

  ScalarField& operator+=(const ScalarField& o) { check(o); s_ += o.s_; return *this; }
  ScalarField& operator-=(const ScalarField& o) { check(o); s_ -= o.s_; return *this; }
  ScalarField& operator*=(double a) { s_ *= a; return *this; }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double a, ScalarField f) { return f *= a; }

 private:
  void check(const ScalarField& o) const {
    if (!(cell_ == o.cell_)) throw ValidationError("unit cell mismatch");
  }

  UnitCell cell_;
  Eigen::MatrixXd s_;
};

class VectorField {
 public:
  VectorField() = default;
  VectorField(const UnitCell& cell, std::array<Eigen::MatrixXd, 3> comps)
      : cell_(cell), c_(std::move(comps)) {
    for (const auto& m : c_)
      if (m.rows() != cell_.N1 || m.cols() != cell_.N2)
        throw ValidationError("field sample shape does not match cell resolution");
  }
  VectorField(ScalarField x, ScalarField y, ScalarField z) : cell_(x.cell()) {
    if (!(y.cell() == cell_) || !(z.cell() == cell_)) throw ValidationError("unit cell mismatch");
    c_ = {x.samples(), y.samples(), z.samples()};
  }

  static VectorField zero(const UnitCell& cell) {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(cell.N1, cell.N2);
    return VectorField(cell, {z, z, z});
  }
  static VectorField constant(const UnitCell& cell, const Eigen::Vector3d& p) {
    return VectorField(cell, {Eigen::MatrixXd::Constant(cell.N1, cell.N2, p.x()),
                              Eigen::MatrixXd::Constant(cell.N1, cell.N2, p.y()),
                              Eigen::MatrixXd::Constant(cell.N1, cell.N2, p.z())});
  }

  const UnitCell& cell() const { return cell_; }
  const Eigen::MatrixXd& comp(int c) const { return c_[c]; }
  Eigen::MatrixXd& comp(int c) { return c_[c]; }
  ScalarField component(int c) const { return ScalarField(cell_, c_[c]); }
  Eigen::Vector3d at(int i, int j) const { return {c_[0](i, j), c_[1](i, j), c_[2](i, j)}; }
  double max_abs() const {
    double m = 0;
    for (const auto& c : c_) m = std::max(m, c.size() ? c.cwiseAbs().maxCoeff() : 0.0);
    return m;
  }

  VectorField& operator+=(const VectorField& o) {
    if (!(cell_ == o.cell_)) throw ValidationError("unit cell mismatch");
    for (int c = 0; c < 3; ++c) c_[c] += o.c_[c];
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    if (!(cell_ == o.cell_)) throw ValidationError("unit cell mismatch");
    for (int c = 0; c < 3; ++c) c_[c] -= o.c_[c];
    return *this;
  }
  VectorField& operator*=(double a) {
    for (auto& c : c_) c *= a;
    return *this;
  }
  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
  friend VectorField operator*(double a, VectorField f) { return f *= a; }

 private:
  UnitCell cell_;
  std::array<Eigen::MatrixXd, 3> c_;
};

namespace detail {

// Signed wavenumber of DFT bin a on an N-point grid: 0..N/2, then negative.
inline int wavenumber(int a, int N) { return a <= N / 2 ? a : a - N; }

// Normalized 2-D DFT: F(a,b) = (1/(N1*N2)) sum s(i,j) e^{-2 pi i(ai/N1 + bj/N2)},
// so F(0,0) is the mean value.
inline Eigen::MatrixXcd dft2(const Eigen::MatrixXd& s) {
  const int N1 = static_cast<int>(s.rows()), N2 = static_cast<int>(s.cols());
  Eigen::FFT<double> fft;
  Eigen::MatrixXcd tmp(N1, N2);
  std::vector<std::complex<double>> in(N1), out(N1);
  for (int j = 0; j < N2; ++j) {
    for (int i = 0; i < N1; ++i) in[i] = s(i, j);
    fft.fwd(out, in);
    for (int i = 0; i < N1; ++i) tmp(i, j) = out[i];
  }
  Eigen::MatrixXcd F(N1, N2);
  std::vector<std::complex<double>> rin(N2), rout(N2);
  for (int i = 0; i < N1; ++i) {
    for (int j = 0; j < N2; ++j) rin[j] = tmp(i, j);
    fft.fwd(rout, rin);
    for (int j = 0; j < N2; ++j) F(i, j) = rout[j];
  }
  F /= static_cast<double>(N1) * N2;
  return F;
}

// Inverse of dft2 (unnormalized synthesis sum); returns the real part.
inline Eigen::MatrixXd idft2(const Eigen::MatrixXcd& F) {
  const int N1 = static_cast<int>(F.rows()), N2 = static_cast<int>(F.cols());
  Eigen::FFT<double> fft;
  Eigen::MatrixXcd tmp(N1, N2);
  std::vector<std::complex<double>> in(N2), out(N2);
  for (int i = 0; i < N1; ++i) {
    for (int j = 0; j < N2; ++j) in[j] = F(i, j);
    fft.inv(out, in);  // Eigen's inv scales by 1/N2
    for (int j = 0; j < N2; ++j) tmp(i, j) = out[j];
  }
  Eigen::MatrixXd s(N1, N2);
  std::vector<std::complex<double>> cin(N1), cout(N1);
  for (int j = 0; j < N2; ++j) {
    for (int i = 0; i < N1; ++i) cin[i] = tmp(i, j);
    fft.inv(cout, cin);
    for (int i = 0; i < N1; ++i) s(i, j) = cout[i].real();
  }
  return s * (static_cast<double>(N1) * N2);
}

inline void zero_nyquist(Eigen::MatrixXcd& F) {
  const int N1 = static_cast<int>(F.rows()), N2 = static_cast<int>(F.cols());
  F.row(N1 / 2).setZero();
  F.col(N2 / 2).setZero();
}

// Multiply by (i 2 pi k/L)^order along the given direction; Nyquist zeroed.
inline Eigen::MatrixXcd deriv_spectrum(Eigen::MatrixXcd F, Dir d, int order, double L1, double L2) {
  const int N1 = static_cast<int>(F.rows()), N2 = static_cast<int>(F.cols());
  const int N = d == Dir::U ? N1 : N2;
  const double L = d == Dir::U ? L1 : L2;
  for (int a = 0; a < N; ++a) {
    std::complex<double> m(0.0, 2 * EIGEN_PI * wavenumber(a, N) / L);
    std::complex<double> f = a == N / 2 ? 0.0 : (order == 1 ? m : m * m);
    if (d == Dir::U)
      F.row(a) *= f;
    else
      F.col(a) *= f;
  }
  zero_nyquist(F);
  return F;
}

// Embed a strict-band spectrum into a larger (M1 x M2) spectrum.
inline Eigen::MatrixXcd pad_spectrum(const Eigen::MatrixXcd& F, int M1, int M2) {
  const int N1 = static_cast<int>(F.rows()), N2 = static_cast<int>(F.cols());
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(M1, M2);
  for (int a = 0; a < N1; ++a) {
    const int k1 = wavenumber(a, N1);
    if (std::abs(k1) >= N1 / 2) continue;
    for (int b = 0; b < N2; ++b) {
      const int k2 = wavenumber(b, N2);
      if (std::abs(k2) >= N2 / 2) continue;
      G((k1 + M1) % M1, (k2 + M2) % M2) = F(a, b);
    }
  }
  return G;
}

// Keep only modes |k1| <= N1/2 - 1, |k2| <= N2/2 - 1 of a larger spectrum.
inline Eigen::MatrixXcd truncate_spectrum(const Eigen::MatrixXcd& G, int N1, int N2) {
  const int M1 = static_cast<int>(G.rows()), M2 = static_cast<int>(G.cols());
  Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(N1, N2);
  for (int k1 = -(N1 / 2 - 1); k1 <= N1 / 2 - 1; ++k1)
    for (int k2 = -(N2 / 2 - 1); k2 <= N2 / 2 - 1; ++k2)
      F((k1 + N1) % N1, (k2 + N2) % N2) = G((k1 + M1) % M1, (k2 + M2) % M2);
  return F;
}

inline int fine_size(int N) { return N + N / 2; }  // 3/2 de-aliasing rule

}  // namespace detail

/// Pointwise samples of an expression; rejects profiles that are not
/// periodic on the cell (boundary-sample mismatch above 1e-10).
inline ScalarField sample(const Expr& e, const UnitCell& cell) {
  Eigen::MatrixXd s(cell.N1, cell.N2);
  for (int i = 0; i < cell.N1; ++i)
    for (int j = 0; j < cell.N2; ++j) s(i, j) = e(cell.u(i), cell.v(j));
  const double tol = 1e-10 * std::max(1.0, s.size() ? s.cwiseAbs().maxCoeff() : 0.0);
  double defect = 0;
  for (int j = 0; j < cell.N2; ++j) defect = std::max(defect, std::abs(e(cell.L1, cell.v(j)) - s(0, j)));
  for (int i = 0; i < cell.N1; ++i) defect = std::max(defect, std::abs(e(cell.u(i), cell.L2) - s(i, 0)));
  if (defect > tol)
    throw ValidationError("profile \"" + e.str() + "\" is not periodic on the cell (boundary mismatch " +
                          std::to_string(defect) + ")");
  return ScalarField(cell, std::move(s));
}

/// Spectral derivative of the given order (1 or 2) along one direction.
/// The mean of any first derivative vanishes identically.
inline ScalarField diff(const ScalarField& f, Dir d, int order = 1) {
  if (order != 1 && order != 2) throw ValidationError("derivative order must be 1 or 2");
  const auto& c = f.cell();
  auto F = detail::dft2(f.samples());
  F = detail::deriv_spectrum(std::move(F), d, order, c.L1, c.L2);
  return ScalarField(c, detail::idft2(F));
}

inline VectorField diff(const VectorField& f, Dir d, int order = 1) {
  return VectorField(diff(f.component(0), d, order), diff(f.component(1), d, order),
                     diff(f.component(2), d, order));
}

/// Projection onto the strict band |k| <= N/2 - 1 (drops Nyquist content).
inline ScalarField band_project(const ScalarField& f) {
  auto F = detail::dft2(f.samples());
  detail::zero_nyquist(F);
  return ScalarField(f.cell(), detail::idft2(F));
}

/// Mean value over the unit cell (arithmetic average of samples; exact
/// quadrature for periodic band-limited data).
inline double mean(const ScalarField& f) { return f.samples().mean(); }

inline Eigen::Vector3d mean(const VectorField& f) {
  return {f.comp(0).mean(), f.comp(1).mean(), f.comp(2).mean()};
}

/// Mean-value inner product; the scalar product is used pointwise for
/// vector fields.
inline double inner(const ScalarField& a, const ScalarField& b) {
  if (!(a.cell() == b.cell())) throw ValidationError("unit cell mismatch");
  return a.samples().cwiseProduct(b.samples()).mean();
}

inline double inner(const VectorField& a, const VectorField& b) {
  if (!(a.cell() == b.cell())) throw ValidationError("unit cell mismatch");
  double s = 0;
  for (int c = 0; c < 3; ++c) s += a.comp(c).cwiseProduct(b.comp(c)).mean();
  return s;
}

template <class Field>
double norm(const Field& f) {
  return std::sqrt(inner(f, f));
}

/// De-aliased product: both factors are evaluated on a 3/2 zero-padded
/// grid, multiplied pointwise and truncated back to the strict band.
inline ScalarField multiply(const ScalarField& a, const ScalarField& b) {
  if (!(a.cell() == b.cell())) throw ValidationError("unit cell mismatch");
  const auto& c = a.cell();
  const int M1 = detail::fine_size(c.N1), M2 = detail::fine_size(c.N2);
  auto Fa = detail::dft2(a.samples());
  auto Fb = detail::dft2(b.samples());
  Eigen::MatrixXd fa = detail::idft2(detail::pad_spectrum(Fa, M1, M2));
  Eigen::MatrixXd fb = detail::idft2(detail::pad_spectrum(Fb, M1, M2));
  auto Fp = detail::dft2(fa.cwiseProduct(fb));
  return ScalarField(c, detail::idft2(detail::truncate_spectrum(Fp, c.N1, c.N2)));
}

/// Orthonormal real Fourier basis of the strict band under the mean-value
/// inner product. Index 0 is the constant field; indices then pair
/// (sqrt2 cos, sqrt2 sin) for each wave vector of the positive half-plane,
/// ordered by k1 then k2. Size is (N1-1)*(N2-1).
class BandBasis {
 public:
  explicit BandBasis(const UnitCell& cell) : cell_(cell) {
    for (int k2 = 1; k2 <= cell.N2 / 2 - 1; ++k2) modes_.push_back({0, k2});
    for (int k1 = 1; k1 <= cell.N1 / 2 - 1; ++k1)
      for (int k2 = -(cell.N2 / 2 - 1); k2 <= cell.N2 / 2 - 1; ++k2) modes_.push_back({k1, k2});
  }

  const UnitCell& cell() const { return cell_; }
  int size() const { return 1 + 2 * static_cast<int>(modes_.size()); }

  ScalarField field(int idx) const {
    if (idx == 0) return ScalarField::constant(cell_, 1.0);
    const auto [k1, k2] = modes_[(idx - 1) / 2];
    const bool is_cos = (idx - 1) % 2 == 0;
    const double r = std::sqrt(2.0);
    Eigen::MatrixXd s(cell_.N1, cell_.N2);
    for (int i = 0; i < cell_.N1; ++i)
      for (int j = 0; j < cell_.N2; ++j) {
        const double phi =
            2 * EIGEN_PI * (static_cast<double>(k1) * i / cell_.N1 + static_cast<double>(k2) * j / cell_.N2);
        s(i, j) = r * (is_cos ? std::cos(phi) : std::sin(phi));
      }
    return ScalarField(cell_, std::move(s));
  }

  /// Coefficients of the strict-band part of f; an isometry from the
  /// mean-value inner product to the Euclidean one.
  Eigen::VectorXd coefficients(const ScalarField& f) const {
    auto F = detail::dft2(f.samples());
    Eigen::VectorXd c(size());
    c(0) = F(0, 0).real();
    const double r = std::sqrt(2.0);
    for (size_t m = 0; m < modes_.size(); ++m) {
      const auto [k1, k2] = modes_[m];
      const auto z = F((k1 + cell_.N1) % cell_.N1, (k2 + cell_.N2) % cell_.N2);
      c(1 + 2 * m) = r * z.real();
      c(2 + 2 * m) = -r * z.imag();
    }
    return c;
  }

  ScalarField synthesize(const Eigen::VectorXd& c) const {
    if (c.size() != size()) throw ValidationError("coefficient vector has wrong length");
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(cell_.N1, cell_.N2);
    F(0, 0) = c(0);
    const double r = std::sqrt(2.0);
    for (size_t m = 0; m < modes_.size(); ++m) {
      const auto [k1, k2] = modes_[m];
      const std::complex<double> z(c(1 + 2 * m) / r, -c(2 + 2 * m) / r);
      F((k1 + cell_.N1) % cell_.N1, (k2 + cell_.N2) % cell_.N2) = z;
      F((-k1 + cell_.N1) % cell_.N1, (-k2 + cell_.N2) % cell_.N2) = std::conj(z);
    }
    return ScalarField(cell_, detail::idft2(F));
  }

 private:
  UnitCell cell_;
  std::vector<std::pair<int, int>> modes_;
};

}  // namespace isoshell
