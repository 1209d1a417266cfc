#include <doctest.h>

#include "mfglab/errors.hpp"
#include "mfglab/master.hpp"
#include "mfglab/random.hpp"
#include "mfglab/value.hpp"
#include "support.hpp"

#include <cmath>

using namespace mfglab;

namespace {
const HamiltonianModel& free2() {
  static const auto m = HamiltonianModel::standard(2);
  return m;
}
DataModel quadratic() { return DataModel(quadratic_function(1.0), zero_function()); }
DataModel weak() { return DataModel(quadratic_function(1.0), gaussian_function(0.1)); }
}  // namespace

TEST_CASE("measure flow") {
  Rng rng(1);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 3, 2, 1.0), 2);
  const auto still = measure_flow(free2(), weak(), mu, 0.0);
  CHECK(still.times().size() == 1);
  CHECK(still.at(0).config() == mu.config());
  const double t = 0.8;
  const auto path = measure_flow(free2(), quadratic(), mu, t);
  for (std::size_t k = 0; k < path.times().size(); k += 31)
    CHECK((path.at(k).config() - mu.config() * (1 + path.times()[k]) / (1 + t)).norm() < 1e-9);
  CHECK(path.fitted_speed() > 0.0);
}

TEST_CASE("decoupled agent ignores the population") {
  Rng rng(2);
  Vec q0(2);
  q0 << 0.4, -0.3;
  const double t = 0.5;
  const EmpiricalMeasure a(uniform_ball_cloud(rng, 3, 2, 1.0), 2);
  const EmpiricalMeasure b(uniform_ball_cloud(rng, 5, 2, 2.0), 2);
  const double ua = master_value(free2(), quadratic(), t, q0, a).u;
  const double ub = master_value(free2(), quadratic(), t, q0, b).u;
  CHECK(std::abs(ua - ub) < 1e-8);
  CHECK(ua == doctest::Approx(q0.squaredNorm() / (2 * (1 + t))).epsilon(1e-9));
  const auto g = master_gradient(free2(), quadratic(), t, q0, a);
  CHECK(g.phi1.cwiseAbs().maxCoeff() < 1e-6);
  CHECK((g.dq0u - q0 / (1 + t)).norm() < 1e-6);
  CHECK(scalar_master_residual(free2(), quadratic(), t, q0, a) < 1e-4);
  for (int i = 0; i < 3; ++i) CHECK(vectorial_master_residual(free2(), quadratic(), t, a, i) < 1e-4);
}

TEST_CASE("master value at the initial time") {
  Rng rng(3);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 3, 2, 1.0), 2);
  Vec q0(2);
  q0 << 0.2, 0.1;
  CHECK(master_value(free2(), weak(), 0.0, q0, mu).u ==
        doctest::Approx(weak().initial().pointwise(q0, WeightedMeasure::uniform(mu))));
}

TEST_CASE("shooting and direct agent solvers agree") {
  Rng rng(4);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 3, 2, 1.0), 2);
  Vec q0(2);
  q0 << -0.5, 0.6;
  MasterOptions direct;
  direct.force_direct = true;
  const auto s = master_value(free2(), weak(), 0.5, q0, mu);
  const auto d = master_value(free2(), weak(), 0.5, q0, mu, direct);
  CHECK(s.method == AgentMethod::Shooting);
  CHECK(d.method == AgentMethod::Direct);
  CHECK(std::abs(s.u - d.u) < 1e-6);
}

TEST_CASE("master equation residuals with weak interaction") {
  Rng rng(5);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 3, 2, 1.0), 2);
  const double t = 0.5;
  const Vec wgrad = wasserstein_gradient(free2(), weak(), t, mu);
  for (int i = 0; i < 3; ++i) {
    const auto g = master_gradient(free2(), weak(), t, mu.point(i), mu);
    CHECK((g.dq0u - particle(wgrad, i, 2)).norm() < 1e-4);
    CHECK(std::abs(g.u - restricted_particle_value(free2(), weak(), t, mu, i)) < 1e-4);
    CHECK(scalar_master_residual(free2(), weak(), t, mu.point(i), mu) < 5e-3);
    CHECK(vectorial_master_residual(free2(), weak(), t, mu, i) < 5e-3);
  }
  Vec far(2);
  far << 3.0, 0.0;
  const double off = scalar_master_residual(free2(), weak(), t, far, mu);
  CHECK(std::isfinite(off));
  CHECK(off < 5e-3);
  CHECK(vectorial_master_residual(free2(), weak(), 0.05, mu, 0) < 5e-3);
}

TEST_CASE("constant shift of the running functional leaves the vectorial residual unchanged") {
  Rng rng(6);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 3, 2, 1.0), 2);
  const DataModel coupled(quadratic_function(1.0), gaussian_function(0.1), zero_function(),
                          gaussian_function(0.1));
  const DataModel shifted(quadratic_function(1.0), gaussian_function(0.1), testing::constant(2.5),
                          gaussian_function(0.1));
  CHECK(std::abs(vectorial_master_residual(free2(), coupled, 0.5, mu, 1) -
                 vectorial_master_residual(free2(), shifted, 0.5, mu, 1)) < 1e-10);
}

TEST_CASE("Hopf-Lax counterexample") {
  const auto r = counterexample_hopf_lax(2.0, 0.0);
  CHECK(r.value == doctest::Approx(-1.25).epsilon(1e-12));
  REQUIRE(r.minimizers.size() == 2);
  CHECK(r.minimizers[0] == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-10));
  CHECK(r.minimizers[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-10));
  CHECK(r.superdiff_lo == doctest::Approx(-std::sqrt(3.0) / 2));
  CHECK(r.superdiff_hi == doctest::Approx(std::sqrt(3.0) / 2));

  const auto small = counterexample_hopf_lax(0.5, 0.0);
  REQUIRE(small.minimizers.size() == 1);
  CHECK(small.minimizers[0] == 0.0);
  CHECK(small.value == doctest::Approx(-1.0));

  const auto far = counterexample_hopf_lax(2.0, 10.0);
  REQUIRE(far.minimizers.size() == 1);
  CHECK(far.minimizers[0] == doctest::Approx(10.0 + 20.0 / std::sqrt(101.0)).epsilon(1e-3));
  const double h = 1e-4;
  const double du =
      (counterexample_hopf_lax(2.0, 10.0 + h).value - counterexample_hopf_lax(2.0, 10.0 - h).value) / (2 * h);
  CHECK(std::abs(du - (10.0 - far.minimizers[0]) / 2.0) < 1e-6);
  CHECK_THROWS_AS(counterexample_hopf_lax(0.0, 1.0), InvalidInput);
}
