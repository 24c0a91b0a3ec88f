#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "mmiq/core.hpp"
#include "mmiq/errors.hpp"
#include "oracle.hpp"

using namespace mmiq;
using mmiq::testing::reference_mmi_matrix;
using mmiq::testing::rephase;

namespace {

double max_abs_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

std::vector<double> random_phases(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("make_transition_matrix validates shape and values") {
  const auto one = make_transition_matrix({{Complex(1, 0)}});
  CHECK(one.n_inputs() == 1);
  CHECK(one.n_outputs() == 1);
  CHECK(one.at(1, 1) == Complex(1, 0));

  const double h = 1.0 / std::sqrt(2.0);
  const auto bs = make_transition_matrix({{{h, 0}, {0, h}}, {{0, h}, {h, 0}}});
  for (int i = 1; i <= 2; ++i)
    for (int k = 1; k <= 2; ++k) CHECK(std::abs(bs.at(i, k)) == doctest::Approx(h).epsilon(1e-15));

  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(make_transition_matrix({{Complex(nan, 0)}}), ValidationError);
  CHECK_THROWS_AS(make_transition_matrix({{Complex(1, 0), Complex(0, 0)}, {Complex(1, 0)}}),
                  ShapeError);
  CHECK_THROWS_AS(make_transition_matrix({}), ShapeError);
  CHECK_THROWS_AS(one.at(2, 1), IndexError);
  CHECK_THROWS_AS(one.at(0, 1), IndexError);
}

TEST_CASE("strict-unitary flag rejects non-unitary grids") {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(2, 2);
  m(0, 0) = 2.0;
  CHECK_THROWS_AS(TransitionMatrix(m, true), ValidationError);
  CHECK_NOTHROW(TransitionMatrix(m, false));
}

TEST_CASE("ideal 2x2 coupler") {
  const auto m = ideal_2x2();
  CHECK(m.strict_unitary());
  CHECK(m.at(1, 1).real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(m.at(1, 1).imag() == 0.0);
  CHECK(std::norm(m.at(1, 2)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.at(1, 2).real() == 0.0);
  CHECK(unitarity_defect(m.entries()) <= 1e-12);
}

TEST_CASE("ideal 4x4 family") {
  const auto zero = ideal_4x4(0.0);
  for (int i = 1; i <= 4; ++i)
    for (int k = 1; k <= 4; ++k) {
      CHECK(zero.at(i, k).imag() == 0.0);
      CHECK(std::abs(zero.at(i, k).real()) == 0.5);
    }
  CHECK(zero.at(2, 3).real() == -0.5);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> theta(-10.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double t = theta(rng);
    const auto m = ideal_4x4(t);
    CHECK(unitarity_defect(m.entries()) <= 1e-12);
    CHECK((m.magnitudes().array() - 0.5).abs().maxCoeff() <= 1e-15);
    // Matches the entry-by-entry construction.
    const auto raw = mmiq::testing::raw_ideal_4x4(t);
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) REQUIRE(std::abs(m.entries()(i, k) - raw[i][k]) <= 1e-15);
  }
  CHECK_THROWS_AS(ideal_4x4(std::numeric_limits<double>::infinity()), ValidationError);
  CHECK_THROWS_AS(ideal_4x4(std::numeric_limits<double>::quiet_NaN()), ValidationError);
}

TEST_CASE("canonical gauge of the 2x2 coupler") {
  // Column 2 times -i clears row 1, then row 2 times -i clears column 1,
  // leaving (1/sqrt 2)[[1, 1], [1, -1]].
  const auto g = canonical_gauge(ideal_2x2());
  const double h = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXcd expected(2, 2);
  expected << h, h, h, -h;
  CHECK(max_abs_diff(g.representative.entries(), expected) <= 1e-15);
  const double phase = std::arg(g.representative.at(2, 2));
  CHECK(phase >= 0.0);
  CHECK(phase <= std::numbers::pi);
  CHECK_FALSE(g.conjugated);
}

TEST_CASE("reference matrix is already canonical") {
  const auto m = reference_mmi_matrix();
  const auto g = canonical_gauge(m);
  CHECK_FALSE(g.conjugated);
  CHECK(max_abs_diff(g.representative.entries(), m.entries()) <= 1e-12);
}

TEST_CASE("canonical gauge rejects vanishing anchors") {
  Eigen::MatrixXcd m = ideal_4x4(0.3).entries();
  m(2, 0) = 0.0;
  try {
    canonical_gauge(TransitionMatrix(m));
    FAIL("expected GaugeAnchorError");
  } catch (const GaugeAnchorError& e) {
    CHECK(e.row() == 3);
    CHECK(e.col() == 1);
  }
  m = ideal_4x4(0.3).entries();
  m(0, 3) = 1e-13;
  CHECK_THROWS_AS(canonical_gauge(TransitionMatrix(m)), GaugeAnchorError);
}

TEST_CASE("canonical gauge properties on random matrices") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 4;
    const auto u = random_unitary(n, 1000 + trial);
    const auto g = canonical_gauge(u);
    const auto& rep = g.representative.entries();

    // Anchors real and non-negative.
    for (int k = 0; k < n; ++k) {
      CHECK(rep(0, k).imag() == 0.0);
      CHECK(rep(0, k).real() >= 0.0);
      CHECK(rep(k, 0).imag() == 0.0);
    }
    // Magnitudes unchanged.
    CHECK((rep.cwiseAbs() - u.entries().cwiseAbs()).cwiseAbs().maxCoeff() <= 1e-15);
    // Idempotent.
    const auto again = canonical_gauge(g.representative);
    CHECK_FALSE(again.conjugated);
    CHECK(max_abs_diff(again.representative.entries(), rep) <= 1e-12);
    // External phases and conjugation do not change the class.
    const auto shifted = rephase(u, random_phases(rng, n), random_phases(rng, n));
    CHECK(gauge_equivalent(u, shifted, 1e-9));
    CHECK(gauge_equivalent(u, shifted.conjugate(), 1e-9));
  }
}

TEST_CASE("gauge equivalence examples") {
  const auto m = random_unitary(4, 3);
  for (double phi : {0.1, 1.0, 2.5, -3.0}) {
    const TransitionMatrix g(m.entries() * std::polar(1.0, phi));
    CHECK(gauge_equivalent(m, g, 1e-9));
  }
  CHECK(gauge_equivalent(m, m.conjugate(), 1e-9));
  CHECK_FALSE(gauge_equivalent(ideal_4x4(0.0), ideal_4x4(std::numbers::pi / 2), 1e-9));
  CHECK(gauge_equivalent(ideal_4x4(0.7), ideal_4x4(-0.7), 1e-9));
  CHECK_THROWS_AS(gauge_equivalent(ideal_2x2(), ideal_4x4(0.0), 1e-9), ShapeError);
}

TEST_CASE("random unitary") {
  const auto one = random_unitary(1, 5);
  CHECK(std::abs(one.at(1, 1)) == doctest::Approx(1.0).epsilon(1e-14));

  const auto u = random_unitary(4, 5);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(u.entries().row(i).norm() - 1.0) <= 1e-10);
  CHECK(unitarity_defect(u.entries()) <= 1e-10);

  CHECK(random_unitary(6, 99).entries() == random_unitary(6, 99).entries());
  CHECK(random_unitary(6, 99).entries() != random_unitary(6, 100).entries());
  CHECK_THROWS_AS(random_unitary(0, 1), ValidationError);
}

TEST_CASE("wrap_phase") {
  CHECK(wrap_phase(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_phase(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_phase(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  CHECK(wrap_phase(0.25) == doctest::Approx(0.25));
}
