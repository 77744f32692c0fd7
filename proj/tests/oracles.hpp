#pragma once

// Test-only oracles, independent of the spectral implementation paths
// they check: composite-Simpson quadrature, finite-difference derivatives
// of expressions, and random strict-band field generators.

#include <isoshell/cellgrid.hpp>
#include <isoshell/expr.hpp>

#include <functional>
#include <random>

namespace oracle {

// Composite Simpson over one period (n even panels).
inline double quad_period(const std::function<double(double)>& f, double L, int n = 2048) {
  double s = f(0.0) + f(L);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * L / n);
  return s * L / (3.0 * n) / L;  // mean value over the period
}

// Central-difference derivative of a 1-variable slice of an expression.
inline std::function<double(double)> fd_derivative(const isoshell::Expr& e, bool along_u,
                                                   double h = 1e-5) {
  return [&e, along_u, h](double t) {
    const double fp = along_u ? e(t + h, 0.0) : e(0.0, t + h);
    const double fm = along_u ? e(t - h, 0.0) : e(0.0, t - h);
    return (fp - fm) / (2.0 * h);
  };
}

// mean of a'(u)^2 over the period, by quadrature of finite differences.
inline double mean_sq_derivative(const isoshell::Expr& e, bool along_u, double L) {
  auto d = fd_derivative(e, along_u);
  return quad_period([&](double t) { return d(t) * d(t); }, L);
}

// Random strict-band scalar field with decaying spectrum.
inline isoshell::ScalarField random_band_field(const isoshell::UnitCell& cell, std::mt19937& rng,
                                               double decay = 0.5) {
  isoshell::BandBasis basis(cell);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd c(basis.size());
  c(0) = 0.0;  // zero mean keeps scales comparable
  for (int i = 1; i < basis.size(); ++i) c(i) = gauss(rng);
  // Damp high modes so the fields look like smooth profiles.
  isoshell::ScalarField f = basis.synthesize(c);
  auto F = isoshell::detail::dft2(f.samples());
  for (int a = 0; a < cell.N1; ++a)
    for (int b = 0; b < cell.N2; ++b) {
      const int k1 = isoshell::detail::wavenumber(a, cell.N1);
      const int k2 = isoshell::detail::wavenumber(b, cell.N2);
      F(a, b) *= std::exp(-decay * std::sqrt(double(k1) * k1 + double(k2) * k2));
    }
  isoshell::detail::zero_nyquist(F);
  return isoshell::ScalarField(cell, isoshell::detail::idft2(F));
}

inline isoshell::VectorField random_band_vector(const isoshell::UnitCell& cell, std::mt19937& rng,
                                                double decay = 0.5) {
  return {random_band_field(cell, rng, decay), random_band_field(cell, rng, decay),
          random_band_field(cell, rng, decay)};
}

}  // namespace oracle
