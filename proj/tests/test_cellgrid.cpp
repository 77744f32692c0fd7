#include <isoshell/cellgrid.hpp>

#include <isoshell/json_io.hpp>

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace isoshell;

namespace {
const UnitCell kCell(2 * EIGEN_PI, 2 * EIGEN_PI, 32, 32);
}

TEST_CASE("cell validation", "[cellgrid]") {
  REQUIRE_THROWS_AS(UnitCell(0.0, 1.0, 32, 32), ValidationError);
  REQUIRE_THROWS_AS(UnitCell(1.0, 1.0, 6, 32), ValidationError);
  REQUIRE_THROWS_AS(UnitCell(1.0, 1.0, 33, 32), ValidationError);
}

TEST_CASE("sampling and periodicity check", "[cellgrid]") {
  auto f = sample(Expr::parse("cos(u)"), kCell);
  REQUIRE_THAT(f(4, 7), Catch::Matchers::WithinAbs(std::cos(kCell.u(4)), 1e-15));

  REQUIRE_THROWS_AS(sample(Expr::parse("u"), kCell), ValidationError);
  REQUIRE(sample(Expr::parse("0"), kCell).max_abs() == 0.0);

  // Period mismatch is rejected too.
  const UnitCell small(1.0, 1.0, 16, 16);
  REQUIRE_THROWS_AS(sample(Expr::parse("cos(u)"), small), ValidationError);
}

TEST_CASE("spectral differentiation is exact on band-limited data", "[cellgrid]") {
  auto s = sample(Expr::parse("sin(u)"), kCell);
  auto c = sample(Expr::parse("cos(u)"), kCell);
  REQUIRE((diff(s, Dir::U).samples() - c.samples()).cwiseAbs().maxCoeff() <= 1e-12);

  auto cv = sample(Expr::parse("cos(v)"), kCell);
  REQUIRE((diff(cv, Dir::V, 2).samples() + cv.samples()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("first derivatives have zero mean", "[cellgrid]") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = oracle::random_band_field(kCell, rng);
    REQUIRE(std::abs(mean(diff(f, Dir::U))) <= 1e-13 * std::max(1.0, f.max_abs()));
    REQUIRE(std::abs(mean(diff(f, Dir::V))) <= 1e-13 * std::max(1.0, f.max_abs()));
  }
}

TEST_CASE("mean and inner products", "[cellgrid]") {
  REQUIRE_THAT(mean(sample(Expr::parse("sin(u)^2"), kCell)), Catch::Matchers::WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(mean(sample(Expr::parse("3"), kCell)), Catch::Matchers::WithinAbs(3.0, 1e-15));
  REQUIRE_THAT(mean(sample(Expr::parse("cos(u)*cos(v)"), kCell)),
               Catch::Matchers::WithinAbs(0.0, 1e-15));

  auto cu = sample(Expr::parse("cos(u)"), kCell);
  auto su = sample(Expr::parse("sin(u)"), kCell);
  REQUIRE_THAT(inner(cu, cu), Catch::Matchers::WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(inner(cu, su), Catch::Matchers::WithinAbs(0.0, 1e-15));

  std::mt19937 rng(11);
  auto f = oracle::random_band_field(kCell, rng);
  REQUIRE_THAT(inner(ScalarField::constant(kCell, 1.0), f),
               Catch::Matchers::WithinAbs(mean(f), 1e-15));

  const UnitCell other(2 * EIGEN_PI, 2 * EIGEN_PI, 16, 16);
  REQUIRE_THROWS_AS(inner(cu, ScalarField::zero(other)), ValidationError);
}

TEST_CASE("integration by parts", "[cellgrid]") {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    auto a = oracle::random_band_field(kCell, rng);
    auto b = oracle::random_band_field(kCell, rng);
    const double scale = std::max(1.0, norm(a) * norm(b));
    REQUIRE(std::abs(inner(diff(a, Dir::U), b) + inner(a, diff(b, Dir::U))) <= 1e-12 * scale);
  }
}

TEST_CASE("differentiation is linear", "[cellgrid]") {
  std::mt19937 rng(17);
  auto a = oracle::random_band_field(kCell, rng);
  auto b = oracle::random_band_field(kCell, rng);
  auto lhs = diff(2.5 * a - 0.75 * b, Dir::V);
  auto rhs = 2.5 * diff(a, Dir::V) - 0.75 * diff(b, Dir::V);
  REQUIRE((lhs.samples() - rhs.samples()).cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, a.max_abs()));
}

TEST_CASE("de-aliased product matches exact means", "[cellgrid]") {
  // cos^2(u) has mean 1/2; the de-aliased product must reproduce the
  // band part of the true product exactly.
  auto cu = sample(Expr::parse("cos(u)"), kCell);
  auto p = multiply(cu, cu);
  REQUIRE_THAT(mean(p), Catch::Matchers::WithinAbs(0.5, 1e-14));
  auto c2 = sample(Expr::parse("cos(2*u)"), kCell);
  // cos^2 = 1/2 + cos(2u)/2
  REQUIRE((p.samples() - (0.5 * c2.samples().array() + 0.5).matrix()).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("band basis is orthonormal and invertible", "[cellgrid]") {
  const UnitCell cell(2 * EIGEN_PI, 4 * EIGEN_PI, 12, 16);
  BandBasis basis(cell);
  REQUIRE(basis.size() == (cell.N1 - 1) * (cell.N2 - 1));

  std::mt19937 rng(19);
  std::uniform_int_distribution<int> pick(0, basis.size() - 1);
  for (int trial = 0; trial < 12; ++trial) {
    const int a = pick(rng), b = pick(rng);
    const double ip = inner(basis.field(a), basis.field(b));
    REQUIRE_THAT(ip, Catch::Matchers::WithinAbs(a == b ? 1.0 : 0.0, 1e-13));
  }

  auto f = oracle::random_band_field(cell, rng);
  auto back = basis.synthesize(basis.coefficients(f));
  REQUIRE((back.samples() - f.samples()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, f.max_abs()));
  // Parseval: coefficient norm equals the mean-value norm.
  REQUIRE_THAT(basis.coefficients(f).norm(), Catch::Matchers::WithinAbs(norm(f), 1e-12));
}

TEST_CASE("field JSON round trip", "[cellgrid]") {
  std::mt19937 rng(23);
  auto f = oracle::random_band_field(kCell, rng);
  auto jf = isoshell::to_json(f);
  REQUIRE(jf.at("kind") == "scalar");
  auto back = isoshell::scalar_field_from_json(jf);
  REQUIRE((back.samples() - f.samples()).cwiseAbs().maxCoeff() == 0.0);

  auto v = oracle::random_band_vector(kCell, rng);
  auto bv = isoshell::vector_field_from_json(isoshell::to_json(v));
  REQUIRE((bv - v).max_abs() == 0.0);

  // Surfaces band-project their corrugation on construction, so the round
  // trip is exact only up to transform rounding.
  auto jx = isoshell::to_json(isoshell::PeriodicSurface::graph(f));
  auto x = isoshell::surface_from_json(jx);
  REQUIRE((x.corrugation().comp(2) - f.samples()).cwiseAbs().maxCoeff() <= 1e-13);
}
