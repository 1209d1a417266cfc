#include <doctest.h>

#include "mfglab/errors.hpp"
#include "mfglab/model.hpp"

#include <cmath>

using namespace mfglab;

TEST_CASE("identity kinetic matrix and zero potential") {
  const auto model = HamiltonianModel::standard(2);
  Vec q(2), p(2);
  q << 0.3, -1.1;
  p << 1.5, 2.0;
  CHECK(model.H(q, p) == doctest::Approx(0.5 * p.squaredNorm()).epsilon(1e-15));
  CHECK(model.H(q, Vec::Zero(2)) == 0.0);
  const auto rep = legendre_check(model, {});
  CHECK(rep.passed);
  CHECK(rep.worst == 0.0);
}

TEST_CASE("anisotropic kinetic matrix halves the energy") {
  const HamiltonianModel model(2, 2.0 * Mat::Identity(2, 2), zero_function());
  Vec p(2);
  p << 2.0, 0.0;
  CHECK(model.H(Vec::Zero(2), p) == doctest::Approx(1.0));
  CHECK(model.kappa3() == doctest::Approx(2.0));
}

TEST_CASE("soft-norm potential is a Legendre pair to round-off") {
  const HamiltonianModel model(2, Mat::Identity(2, 2), soft_norm_function(1.0));
  AuditRegion region;
  region.radius = 3.0;
  region.samples = 100;
  const auto rep = legendre_check(model, region);
  CHECK(rep.passed);
  CHECK(rep.worst < 1e-10);
  Vec q(2);
  q << 1.0, 2.0;
  CHECK(model.H(q, Vec::Zero(2)) == -model.potential().value(q));
}

TEST_CASE("derivative audit") {
  SUBCASE("zero potential has vanishing third derivatives") {
    const auto model = HamiltonianModel::standard(3);
    Vec q = Vec::Constant(3, 0.4), p = Vec::Constant(3, -0.2);
    CHECK(model.third_H(q, p).max_abs() == 0.0);
    CHECK(model.third_L(q, p).max_abs() == 0.0);
    CHECK(derivative_check(model, {}).passed);
  }
  SUBCASE("cosine ridge") {
    const HamiltonianModel model(1, Mat::Identity(1, 1), cosine_ridge_function(1.0));
    AuditRegion region;
    region.radius = 3.0;
    const auto rep = derivative_check(model, region);
    CHECK(rep.passed);
    CHECK(rep.details.at("growth_constant").get<double>() > 0.0);
    CHECK(rep.details.at("growth_constant").get<double>() < 1.0);
  }
  SUBCASE("nonnegative potential gives nonnegative Lagrangian") {
    const HamiltonianModel model(2, Mat::Identity(2, 2), quadratic_function(1.0));
    const auto rep = derivative_check(model, {});
    CHECK(rep.details.at("lagrangian_nonnegative").get<bool>());
  }
}

TEST_CASE("gradients of H and L are mutually inverse") {
  Mat a(2, 2);
  a << 2.0, 0.5, 0.5, 1.0;
  const HamiltonianModel model(2, a, cosine_ridge_function(0.3));
  Vec q(2), v(2);
  q << 0.1, 0.2;
  v << -0.7, 1.3;
  const Vec p = model.dvL(q, v);
  CHECK((model.dpH(q, p) - v).norm() < 1e-13);
  CHECK(model.H(q, p) == doctest::Approx(v.dot(p) - model.L(q, v)).epsilon(1e-14));
}

TEST_CASE("model validation") {
  Mat bad(2, 2);
  bad << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(HamiltonianModel(2, bad, zero_function()), ModelError);
  CHECK_THROWS_AS(HamiltonianModel(2, -Mat::Identity(2, 2), zero_function()), ModelError);
  CHECK_THROWS_AS(HamiltonianModel::from_json({{"dimension", 4}}), ConfigError);
  CHECK_THROWS_AS(HamiltonianModel::from_json({{"dimension", 1}, {"potential", {{"name", "nope"}}}}),
                  ConfigError);
  AuditRegion region;
  region.samples = 0;
  CHECK_THROWS(region.validate());
}

TEST_CASE("model json round trip") {
  const auto spec = nlohmann::json{{"dimension", 2},
                                   {"kinetic", {{2.0, 0.5}, {0.5, 1.0}}},
                                   {"potential", {{"name", "soft_norm"}, {"alpha", 0.5}}}};
  const auto model = HamiltonianModel::from_json(spec);
  const auto again = HamiltonianModel::from_json(model.to_json());
  Vec q(2), p(2);
  q << 0.2, 0.9;
  p << -1.0, 0.4;
  CHECK(again.H(q, p) == model.H(q, p));
  CHECK(HamiltonianModel::from_json({{"dimension", 2}, {"kinetic", 3.0}}).kinetic()(1, 1) == 3.0);
}
