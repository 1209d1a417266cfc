#include <doctest.h>

#include "mfglab/data.hpp"
#include "mfglab/errors.hpp"
#include "mfglab/random.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

using namespace mfglab;

namespace {
Vec pts(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}
}  // namespace

TEST_CASE("initial functional on small measures") {
  const ConvolutionFunctional quad(quadratic_function(1.0), zero_function());
  CHECK(quad.value(EmpiricalMeasure(pts({1, 0, -1, 0}), 2)) == doctest::Approx(0.5));

  const ConvolutionFunctional gauss(zero_function(), gaussian_function(1.0));
  CHECK(gauss.value(EmpiricalMeasure(Vec::Zero(2), 2)) == doctest::Approx(0.5));
  CHECK(gauss.value(EmpiricalMeasure(pts({0, 0, 1, 0}), 2)) ==
        doctest::Approx(0.25 * (1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(gauss.value(EmpiricalMeasure(pts({0, 0, 1, 0}), 2)) == doctest::Approx(0.34197).epsilon(1e-5));
}

TEST_CASE("wasserstein gradient of the initial functional") {
  const ConvolutionFunctional quad(quadratic_function(1.0), zero_function());
  const auto mu = WeightedMeasure::uniform(EmpiricalMeasure(pts({0.3, -1.0}), 1));
  CHECK(quad.pointwise_gradient(pts({0.7}), mu)(0) == doctest::Approx(0.7));

  const ConvolutionFunctional gauss(zero_function(), gaussian_function(1.0));
  const auto delta = WeightedMeasure::uniform(EmpiricalMeasure(pts({0.4, -0.2}), 2));
  CHECK(gauss.pointwise_gradient(pts({0.4, -0.2}), delta).norm() == 0.0);

  // m D_{q_i} U0^(m) from finite differences
  const ConvolutionFunctional both(quadratic_function(1.0), gaussian_function(0.5));
  Rng rng(2);
  const int m = 5, d = 2;
  const Vec q = uniform_ball_cloud(rng, m, d, 1.0);
  const auto mu2 = WeightedMeasure::uniform(EmpiricalMeasure(q, d));
  const Vec g = both.restricted_gradient(q, d);
  for (int i = 0; i < m; ++i) {
    const Vec wg = both.pointwise_gradient(particle(q, i, d), mu2);
    CHECK((wg - m * particle(g, i, d)).norm() < 1e-12);
    for (int c = 0; c < d; ++c) {
      Vec qp = q, qm = q;
      const double h = 1e-5;
      qp(i * d + c) += h;
      qm(i * d + c) -= h;
      const double fd = m * (both.restricted(qp, d) - both.restricted(qm, d)) / (2 * h);
      CHECK(std::abs(fd - wg(c)) < 1e-6);
    }
  }
}

TEST_CASE("discrete Hessian of the initial functional") {
  SUBCASE("no interaction gives block-diagonal Hessian") {
    const ConvolutionFunctional quad(quadratic_function(1.0), zero_function());
    const Mat h = quad.restricted_hessian(pts({0.1, 0.2, 0.3, -0.5}), 2);
    CHECK(block(h, 0, 1, 2).norm() == 0.0);
    CHECK((block(h, 0, 0, 2) - 0.5 * Mat::Identity(2, 2)).norm() < 1e-15);
  }
  SUBCASE("two particles interacting through a Gaussian") {
    const ConvolutionFunctional gauss(zero_function(), gaussian_function(1.0));
    const Vec q = pts({0.3, -0.1, -0.4, 0.5});
    const Mat h = gauss.restricted_hessian(q, 2);
    const Mat expected = -0.25 * gaussian_function(1.0)->hessian(pts({0.7, -0.6}));
    CHECK((block(h, 0, 1, 2) - expected).cwiseAbs().maxCoeff() < 1e-14);
    const auto f = [&](const Vec& x) { return gauss.restricted(x, 2); };
    CHECK((finite_difference_hessian(f, q, 1e-4) - h).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("third derivatives match differences of the Hessian") {
    const ConvolutionFunctional both(quadratic_function(1.0), gaussian_function(0.7));
    const Vec q = pts({0.2, -0.3, 0.9, 0.1, -0.5, 0.4});
    const Tensor3 t = both.restricted_third(q, 2);
    const double h = 1e-5;
    for (int c = 0; c < 6; ++c) {
      Vec qp = q, qm = q;
      qp(c) += h;
      qm(c) -= h;
      const Mat dh = (both.restricted_hessian(qp, 2) - both.restricted_hessian(qm, 2)) / (2 * h);
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) CHECK(std::abs(dh(a, b) - t(a, b, c)) < 1e-8);
    }
  }
}

TEST_CASE("Fourier monotonicity certificates") {
  const auto g = fourier_monotonicity(*gaussian_function(1.0), 1);
  CHECK(g.verdict);
  CHECK(g.witness >= 0.0);
  const auto b = fourier_monotonicity(*bump_phi1(1.0, 2.0), 1);
  CHECK_FALSE(b.verdict);
  CHECK(b.witness < 0.0);
  const auto z = fourier_monotonicity(*zero_function(), 1);
  CHECK(z.verdict);
  CHECK(z.witness == 0.0);
  CHECK(fourier_monotonicity(*gaussian_function(1.0), 2).verdict);
  CHECK_THROWS_AS(fourier_monotonicity(*quadratic_function(1.0), 1), ResolutionError);
  CHECK_THROWS_AS(fourier_monotonicity(*gaussian_function(1.0), 3), InvalidInput);
}

TEST_CASE("displacement modulus") {
  auto c = displacement_modulus(4.0, 1.0);
  CHECK(c.witness == doctest::Approx(2.0));
  CHECK(c.verdict);
  c = displacement_modulus(1.0, 1.0);
  CHECK(c.witness == doctest::Approx(-1.0));
  CHECK_FALSE(c.verdict);
  CHECK(displacement_modulus(3.0, 0.0).witness == doctest::Approx(3.0));
  const DataModel bump(quadratic_function(4.0), bump_function(1.0, 2.0, 0.25));
  const auto cert = displacement_modulus(bump, 1);
  CHECK(cert.verdict);
  CHECK(cert.witness > 1.0);
}

TEST_CASE("discrete convexity check") {
  const ConvolutionFunctional quad(quadratic_function(1.0), zero_function());
  Rng rng(9);
  for (int m : {1, 3, 6}) {
    const Vec q = uniform_ball_cloud(rng, m, 2, 1.0);
    const auto f = [&](const Vec& x) { return quad.restricted(x, 2); };
    const auto rep = discrete_convexity_check(f, m, 1.0, {q});
    CHECK(rep.worst_eigenvalue == doctest::Approx(1.0 / m).epsilon(1e-5));
    CHECK(rep.passed);
    CHECK(discrete_convexity_check(f, m, 0.0, {q}).passed);
  }
  const DataModel bump(quadratic_function(4.0), bump_function(1.0, 2.0, 0.25));
  const double kappa = displacement_modulus(bump, 1).witness;
  for (int m : {2, 4, 8}) {
    const Vec q = uniform_ball_cloud(rng, m, 1, 1.5);
    const auto f = [&](const Vec& x) { return bump.initial().restricted(x, 1); };
    CHECK(discrete_convexity_check(f, m, kappa, {q}, 1e-5).passed);
  }
}

TEST_CASE("bump cutoff") {
  const auto b = bump_phi1(1.0, 2.0);
  CHECK(b->value(pts({0.0})) == 1.0);
  CHECK(b->value(pts({2.0})) == 0.0);
  CHECK(b->value(pts({3.5, 0.0})) == 0.0);
  CHECK(b->value(pts({1.4, -0.3})) == b->value(pts({-1.4, 0.3})));
  // first and second derivatives are continuous across both junctions
  for (double r : {1.0, 2.0}) {
    const double e = 1e-7;
    const double d1 = b->gradient(pts({r + e}))(0) - b->gradient(pts({r - e}))(0);
    const double d2 = b->hessian(pts({r + e}))(0, 0) - b->hessian(pts({r - e}))(0, 0);
    CHECK(std::abs(d1) < 1e-5);
    CHECK(std::abs(d2) < 1e-5);
  }
  CHECK_THROWS_AS(bump_phi1(2.0, 1.0), InvalidInput);
}

TEST_CASE("data model validation") {
  CHECK_THROWS_AS(DataModel::from_json({{"phi1", {{"name", "cosine"}, {"alpha", 1.0}}},
                                        {"phi", {{"name", "quadratic"}}}},
                                       1),
                  ConfigError);
  CHECK_THROWS_AS(DataModel::from_json({{"phi", {{"name", "quadratic"}, {"lambda", 0.1}}},
                                        {"phi1", {{"name", "gaussian"}, {"amplitude", 2.0}}},
                                        {"require_convex", true}},
                                       1),
                  ConfigError);
  const auto ok = DataModel::from_json({{"phi", {{"name", "quadratic"}, {"lambda", 2.0}}},
                                        {"phi1", {{"name", "gaussian"}, {"amplitude", 0.5}}},
                                        {"require_convex", true}},
                                       2);
  CHECK(ok.lambda(2) == doctest::Approx(2.0));
  CHECK(ok.lambda1(2) == doctest::Approx(-1.0).epsilon(1e-6));
}
