#include <doctest.h>

#include <cmath>
#include <limits>

#include "mmiq/errors.hpp"
#include "mmiq/io.hpp"

using namespace mmiq;

TEST_CASE("matrix JSON round trip") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto u = random_unitary(1 + static_cast<int>(seed % 6), seed);
    const auto back = io::matrix_from_json(io::parse_json(io::dump(io::to_json(u))));
    CHECK((back.entries() - u.entries()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("shortest doubles read back exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("visibility JSON round trip keeps undefined cells") {
  auto v = visibility_matrix(random_unitary(4, 7));
  v.set(1, 3, std::nullopt);
  const auto j = io::to_json(v);
  CHECK(j["values"][1][3].is_null());
  const auto back = io::visibility_from_json(io::parse_json(io::dump(j)));
  REQUIRE(back.rows() == v.rows());
  CHECK(back.input_pairs() == v.input_pairs());
  for (int r = 0; r < v.rows(); ++r)
    for (int c = 0; c < v.cols(); ++c) {
      CHECK(back.at(r, c).has_value() == v.at(r, c).has_value());
      if (v.at(r, c)) CHECK(std::abs(*back.at(r, c) - *v.at(r, c)) <= 1e-12);
    }
}

TEST_CASE("magnitudes accept a bare grid or an object") {
  const auto bare = io::magnitudes_from_json(io::parse_json("[[0.5, 0.5], [0.5, 0.5]]"));
  CHECK(bare.values(1, 0) == 0.5);
  CHECK_FALSE(bare.uncertainty);

  MagnitudeGrid g = magnitudes_of(random_unitary(3, 2));
  g.uncertainty = Eigen::MatrixXd::Constant(3, 3, 0.01);
  const auto back = io::magnitudes_from_json(io::parse_json(io::dump(io::to_json(g))));
  CHECK((back.values - g.values).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE(back.uncertainty);
  CHECK((*back.uncertainty)(2, 2) == 0.01);
}

TEST_CASE("malformed JSON reports its position") {
  try {
    io::parse_json("{\n  \"n_inputs\": 2,\n  \"entries\": [\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
  CHECK_THROWS_AS(io::matrix_from_json(io::parse_json("{\"n_inputs\": 2}")), ParseError);
  CHECK_THROWS_AS(
      io::matrix_from_json(io::parse_json(
          R"({"n_inputs": 1, "n_outputs": 2, "entries": [[[1, 0]]]})")),
      Error);
}

TEST_CASE("trace CSV round trip") {
  DipTrace t;
  for (int i = 0; i < 20; ++i)
    t.samples.push_back({-100.0 + 10.0 * i, 1000.0 + i * 0.25, 3.0 + i});
  const auto back = io::trace_from_csv(io::trace_to_csv(t));
  REQUIRE(back.samples.size() == t.samples.size());
  CHECK(back.has_accidentals());
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    CHECK(back.samples[i].delay_um == t.samples[i].delay_um);
    CHECK(back.samples[i].coincidences == t.samples[i].coincidences);
    CHECK(*back.samples[i].accidentals == *t.samples[i].accidentals);
  }
}

TEST_CASE("trace CSV tolerates CRLF and blank lines") {
  const auto t = io::trace_from_csv("\xEF\xBB\xBF" "delay_um,coincidences\r\n-10,5\r\n\r\n10,7\r\n");
  REQUIRE(t.samples.size() == 2);
  CHECK(t.samples[1].coincidences == 7.0);
  CHECK_FALSE(t.has_accidentals());
}

TEST_CASE("bad trace CSV") {
  CHECK_THROWS_AS(io::trace_from_csv("delay,counts\n1,2\n"), ParseError);
  try {
    io::trace_from_csv("delay_um,coincidences\n1,2\n3,abc\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(io::trace_from_csv("delay_um,coincidences\n1,2,3\n"), ParseError);
}

TEST_CASE("missing files") {
  CHECK_THROWS_AS(io::read_file("/nonexistent/dir/file.json"), FileError);
}
