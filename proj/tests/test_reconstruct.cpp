#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mmiq/errors.hpp"
#include "mmiq/reconstruct.hpp"
#include "oracle.hpp"

using namespace mmiq;
using mmiq::testing::oracle_visibility;
using mmiq::testing::raw_ideal_4x4;

namespace {

ReconstructionOptions quick(int starts = 8) {
  ReconstructionOptions o;
  o.starts = starts;
  o.seed = 3;
  return o;
}

// Canonical interior phases of the theta splitter, row-major.
std::vector<double> canonical_phases(double theta) {
  const auto g = canonical_gauge(ideal_4x4(theta)).representative;
  std::vector<double> phases;
  for (int i = 2; i <= 4; ++i)
    for (int k = 2; k <= 4; ++k) phases.push_back(std::arg(g.at(i, k)));
  return phases;
}

}  // namespace

TEST_CASE("objective") {
  const auto m = random_unitary(4, 8);
  const auto v = visibility_matrix(m);
  const auto self = objective(m, v);
  CHECK(self.rms == 0.0);
  CHECK(self.included_cells == 36);
  CHECK(self.excluded_cells == 0);

  // theta = pi flips the sign of every interfering cell relative to theta = 0.
  const auto a = raw_ideal_4x4(0.0);
  const auto b = raw_ideal_4x4(std::numbers::pi);
  double sum = 0.0;
  for (const auto& in : lexicographic_pairs(4))
    for (const auto& out : lexicographic_pairs(4)) {
      const double d = oracle_visibility(b, in.first, in.second, out.first, out.second) -
                       oracle_visibility(a, in.first, in.second, out.first, out.second);
      sum += d * d;
    }
  const double expected = std::sqrt(sum / 36.0);
  const auto value = objective(ideal_4x4(std::numbers::pi), visibility_matrix(ideal_4x4(0.0)));
  CHECK(value.rms > 0.0);
  CHECK(value.rms == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(objective(m, v, 1.0), DegenerateDataError);
  CHECK_THROWS_AS(objective(ideal_2x2(), v), ShapeError);
}

TEST_CASE("parameterize") {
  const MagnitudeGrid mags = magnitudes_of(ideal_4x4(0.0));
  const std::vector<double> zeros(9, 0.0);
  const auto real = parameterize(mags, zeros);
  for (int i = 1; i <= 4; ++i)
    for (int k = 1; k <= 4; ++k) {
      CHECK(real.at(i, k).imag() == 0.0);
      CHECK(real.at(i, k).real() == 0.5);
    }

  for (double theta : {0.0, 0.7, 2.1}) {
    const auto m = parameterize(magnitudes_of(ideal_4x4(theta)), canonical_phases(theta));
    CHECK(gauge_equivalent(m, ideal_4x4(theta), 1e-12));
  }

  auto phases = canonical_phases(0.4);
  const auto before = parameterize(mags, phases);
  phases[4] += 0.3;
  const auto after = parameterize(mags, phases);
  int changed = 0;
  for (int i = 1; i <= 4; ++i)
    for (int k = 1; k <= 4; ++k) changed += before.at(i, k) != after.at(i, k);
  CHECK(changed == 1);
  CHECK(after.at(3, 3) != before.at(3, 3));

  CHECK_THROWS_AS(parameterize(mags, std::vector<double>(8, 0.0)), ShapeError);
}

TEST_CASE("round trip through an ideal splitter") {
  const auto target = ideal_4x4(0.7);
  const auto result = reconstruct(visibility_matrix(target), magnitudes_of(target), quick());
  CHECK(result.objective < 1e-8);
  CHECK(gauge_equivalent(result.matrix, target, 1e-4));
  CHECK(result.starts.size() == 8);
  CHECK_FALSE(result.underdetermined);
  CHECK(result.excluded_cells.empty());

  // Reported objective is the RMS of the residual grid.
  double sum = 0.0;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) sum += result.residuals(r, c) * result.residuals(r, c);
  CHECK(std::abs(std::sqrt(sum / 36.0) - result.objective) <= 1e-12);
}

TEST_CASE("zero-phase start is a stationary point") {
  // Visibilities are even in every interior phase, so the real start has a
  // vanishing gradient and later starts must do the work.
  const auto u = random_unitary(4, 21);
  const auto result = reconstruct(visibility_matrix(u), magnitudes_of(u), quick(1));
  CHECK(result.starts[0].iterations == 0);
}

TEST_CASE("more starts never do worse") {
  const auto u = random_unitary(4, 12);
  const auto v = visibility_matrix(u);
  const auto single = reconstruct(v, magnitudes_of(u), quick(1));
  const auto many = reconstruct(v, magnitudes_of(u), quick(20));
  CHECK(many.objective <= single.objective);
  CHECK(many.objective < 1e-6);
  CHECK(gauge_equivalent(many.matrix, u, 1e-3));
}

TEST_CASE("descent histories are non-increasing") {
  const auto u = random_unitary(4, 30);
  const auto result = reconstruct(visibility_matrix(u), magnitudes_of(u), quick(10));
  for (const auto& s : result.starts) {
    CHECK_FALSE(s.failed);
    for (std::size_t i = 1; i < s.history.size(); ++i) CHECK(s.history[i] <= s.history[i - 1]);
  }
}

TEST_CASE("thread count does not change the result") {
  const auto u = random_unitary(4, 31);
  const auto v = visibility_matrix(u);
  auto options = quick(12);
  options.threads = 1;
  const auto serial = reconstruct(v, magnitudes_of(u), options);
  for (int threads : {2, 5, 0}) {
    options.threads = threads;
    const auto parallel = reconstruct(v, magnitudes_of(u), options);
    CHECK(parallel.matrix.entries() == serial.matrix.entries());
    CHECK(parallel.best_start == serial.best_start);
    for (std::size_t s = 0; s < serial.starts.size(); ++s)
      CHECK(parallel.starts[s].history == serial.starts[s].history);
  }
}

TEST_CASE("conjugated device gives the same representative") {
  const auto u = random_unitary(4, 40);
  const auto a = reconstruct(visibility_matrix(u), magnitudes_of(u), quick());
  const auto b = reconstruct(visibility_matrix(u.conjugate()), magnitudes_of(u.conjugate()),
                             quick());
  CHECK(a.matrix.entries() == b.matrix.entries());
}

TEST_CASE("joint refinement absorbs magnitude errors") {
  const auto u = random_unitary(4, 50);
  MagnitudeGrid noisy = magnitudes_of(u);
  noisy.values(1, 2) *= 1.04;
  noisy.values(2, 1) *= 0.97;
  noisy.values(3, 3) *= 1.03;
  const auto v = visibility_matrix(u);

  const auto fixed = reconstruct(v, noisy, quick(12));
  auto joint_options = quick(12);
  joint_options.mode = ReconstructionMode::joint_refinement;
  joint_options.magnitude_penalty_weight = 1e-4;
  const auto joint = reconstruct(v, noisy, joint_options);
  CHECK(joint.objective < fixed.objective);
  // Recovered magnitudes move toward the true ones.
  const double before = (noisy.values - u.magnitudes()).norm();
  const double after = (joint.matrix.magnitudes() - u.magnitudes()).norm();
  CHECK(after < before);
}

TEST_CASE("reconstruction on a rectangular device") {
  Eigen::MatrixXcd a = random_unitary(5, 60).entries().topLeftCorner(3, 4);
  const TransitionMatrix m(a);
  const auto result = reconstruct(visibility_matrix(m), magnitudes_of(m), quick(12));
  CHECK(result.objective < 1e-6);
  CHECK(result.matrix.n_inputs() == 3);
  CHECK(result.matrix.n_outputs() == 4);
}

TEST_CASE("under-determined data are flagged") {
  // A 2x3 device has 3 visibility cells and 2 free phases; 2x2 has one cell
  // and one phase, so trim to a single usable cell for 2x3 via masking.
  const TransitionMatrix m(random_unitary(3, 70).entries().topRows(2));
  VisibilityMatrix v = visibility_matrix(m);
  v.set(0, 1, std::nullopt);
  v.set(0, 2, std::nullopt);
  const auto result = reconstruct(v, magnitudes_of(m), quick(4));
  CHECK(result.underdetermined);
  CHECK(result.excluded_cells.size() == 2);
}

TEST_CASE("reconstruction input errors") {
  const auto u = random_unitary(4, 80);
  const auto v = visibility_matrix(u);
  CHECK_THROWS_AS(reconstruct(v, magnitudes_of(ideal_2x2()), quick()), ShapeError);
  auto bad = quick();
  bad.starts = 0;
  CHECK_THROWS_AS(reconstruct(v, magnitudes_of(u), bad), ValidationError);
  MagnitudeGrid negative = magnitudes_of(u);
  negative.values(0, 0) = -0.1;
  CHECK_THROWS_AS(reconstruct(v, negative, quick()), ValidationError);
  VisibilityMatrix empty(lexicographic_pairs(4), lexicographic_pairs(4));
  CHECK_THROWS_AS(reconstruct(empty, magnitudes_of(u), quick()), DegenerateDataError);
}

TEST_CASE("residual report") {
  const auto u = random_unitary(4, 90);
  const auto v = visibility_matrix(u);
  const auto result = reconstruct(v, magnitudes_of(u), quick());
  for (const auto& row : residual_report(result, v)) {
    CHECK(row.included);
    CHECK(std::abs(row.residual) <= 1e-6);
  }

  VisibilityMatrix corrupted = v;
  corrupted.set(2, 4, *v.at(2, 4) + 0.3);
  corrupted.set(5, 0, std::nullopt);
  const auto rows = residual_report(result, corrupted);
  REQUIRE(rows.size() == 36);
  CHECK(rows.front().input == corrupted.input_pairs()[2]);
  CHECK(rows.front().output == corrupted.output_pairs()[4]);
  CHECK(rows.front().residual == doctest::Approx(-0.3).epsilon(1e-5));
  CHECK_FALSE(rows.back().included);
  CHECK(rows.back().input == ModePair{3, 4});
  CHECK(rows.back().output == ModePair{1, 2});
  for (std::size_t i = 1; i + 1 < rows.size(); ++i)
    CHECK(std::abs(rows[i].residual) <= std::abs(rows[i - 1].residual));
}
