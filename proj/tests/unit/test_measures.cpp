#include <doctest.h>

#include "mfglab/errors.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/random.hpp"

#include <cmath>

using namespace mfglab;

namespace {
EmpiricalMeasure line(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return EmpiricalMeasure(v, 1);
}
}  // namespace

TEST_CASE("w2 of single particles is the distance") {
  Vec a(2), b(2);
  a << 1.0, 2.0;
  b << 4.0, 6.0;
  CHECK(w2_distance(EmpiricalMeasure(a, 2), EmpiricalMeasure(b, 2)).distance == doctest::Approx(5.0));
}

TEST_CASE("w2 on the line uses the sorted matching") {
  const auto mu = line({0.0, 2.0}), nu = line({1.0, 3.0});
  for (auto solver : {TransportSolver::Sorting, TransportSolver::Exhaustive, TransportSolver::Assignment}) {
    const Transport t = w2_distance(mu, nu, solver);
    CHECK(t.distance == doctest::Approx(1.0));
    CHECK(t.coupling.perm == std::vector<int>{0, 1});
  }
  CHECK(coupling_cost(mu, nu, {1, 0}) == doctest::Approx(5.0));
}

TEST_CASE("w2 of a measure with itself") {
  Rng rng(3);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 6, 2, 1.0), 2);
  const Transport t = w2_distance(mu, mu);
  CHECK(t.distance == 0.0);
  CHECK(t.coupling.perm == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("assignment solver matches brute force") {
  Rng rng(17);
  for (int k = 0; k < 50; ++k) {
    const int m = 1 + static_cast<int>(rng() % 7), d = 1 + static_cast<int>(rng() % 3);
    const EmpiricalMeasure mu(uniform_ball_cloud(rng, m, d, 2.0), d);
    const EmpiricalMeasure nu(uniform_ball_cloud(rng, m, d, 2.0), d);
    CHECK(w2_distance(mu, nu, TransportSolver::Assignment).distance ==
          w2_distance(mu, nu, TransportSolver::Exhaustive).distance);
  }
}

TEST_CASE("transport input validation") {
  CHECK_THROWS_AS(w2_distance(line({0.0}), line({0.0, 1.0})), InvalidInput);
  Vec a = Vec::Zero(2);
  CHECK_THROWS_AS(w2_distance(EmpiricalMeasure(a, 1), EmpiricalMeasure(a, 2)), InvalidInput);
  CHECK_THROWS_AS(EmpiricalMeasure(Vec::Zero(3), 2), InvalidInput);
}

TEST_CASE("displacement interpolation") {
  const auto mu = line({0.0, 2.0}), nu = line({1.0, 3.0});
  CHECK(displacement_interpolate(mu, nu, 0.0).config() == mu.config());
  const auto mid = displacement_interpolate(mu, nu, 0.5);
  CHECK(mid.point(0)(0) == doctest::Approx(0.5));
  CHECK(mid.point(1)(0) == doctest::Approx(2.5));
  CHECK(displacement_interpolate(line({0.0}), line({2.0}), 0.5).point(0)(0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(displacement_interpolate(mu, nu, 1.5), InvalidInput);
}

TEST_CASE("geodesics have constant speed") {
  Rng rng(5);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 5, 2, 1.0), 2);
  const EmpiricalMeasure nu(uniform_ball_cloud(rng, 5, 2, 1.0), 2);
  const double w = w2_distance(mu, nu).distance;
  for (double t : {0.2, 0.5, 0.9})
    CHECK(std::abs(w2_distance(mu, displacement_interpolate(mu, nu, t)).distance - t * w) < 1e-9);
}

TEST_CASE("classical interpolation and second moments") {
  const auto mix = classical_interpolate(line({0.0}), line({1.0}), 0.25);
  REQUIRE(mix.size() == 2);
  CHECK(mix.weights[0] == doctest::Approx(0.75));
  CHECK(mix.weights[1] == doctest::Approx(0.25));
  CHECK(second_moment(classical_interpolate(line({0.0}), line({2.0}), 0.5)) == doctest::Approx(2.0));
  const auto start = classical_interpolate(line({0.0, 1.0}), line({5.0, 6.0}), 0.0);
  for (int i = 0; i < start.size(); ++i)
    if (start.weights[i] > 0.0) CHECK(start.weights[i] == doctest::Approx(0.5));
  CHECK(second_moment(line({0.0})) == 0.0);
  Vec p(2);
  p << 3.0, 4.0;
  CHECK(second_moment(EmpiricalMeasure(p, 2)) == doctest::Approx(25.0));
  CHECK(second_moment(line({0.0, 2.0})) == doctest::Approx(2.0));
}

TEST_CASE("measure csv and json") {
  const auto mu = line({0.1, -2.0});
  CHECK(mu.to_csv() == "index,x0\r\n0,0.10000000000000001\r\n1,-2\r\n");
  const auto back = EmpiricalMeasure::from_json(mu.to_json(), 1);
  CHECK(back.config() == mu.config());
}
