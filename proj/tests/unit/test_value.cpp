#include <doctest.h>

#include "mfglab/errors.hpp"
#include "mfglab/random.hpp"
#include "mfglab/value.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

using namespace mfglab;

namespace {
DataModel quadratic() { return DataModel(quadratic_function(1.0), zero_function()); }
DataModel interacting() { return DataModel(quadratic_function(1.5), gaussian_function(0.5)); }

}  // namespace

TEST_CASE("value at the initial time") {
  const auto model = HamiltonianModel::standard(2);
  Rng rng(1);
  const Vec q = uniform_ball_cloud(rng, 3, 2, 1.0);
  CHECK(value(model, interacting(), 0.0, q).value == interacting().initial().restricted(q, 2));
}

TEST_CASE("closed-form value for quadratic data") {
  const auto model = HamiltonianModel::standard(1);
  Vec q(1);
  q << 2.0;
  CHECK(value(model, quadratic(), 1.0, q).value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(value(model, quadratic(), 1.0, q, ValueMethod::Direct).value ==
        doctest::Approx(1.0).epsilon(1e-8));
  Rng rng(2);
  const auto m2 = HamiltonianModel::standard(2);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 4, 2, 1.0), 2);
  const double t = 0.6;
  CHECK((wasserstein_gradient(m2, quadratic(), t, mu) - mu.config() / (1 + t)).norm() < 1e-10);
  const auto hk = hessian_kernel(m2, quadratic(), t, mu);
  for (const Mat& l0 : hk.lambda0) CHECK((l0 - Mat::Identity(2, 2) / (1 + t)).norm() < 1e-4);
  CHECK(hk.lambda1.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(hj_residual(m2, quadratic(), t, mu.config()) < 1e-5);
}

TEST_CASE("characteristics and direct minimization agree") {
  const auto model = HamiltonianModel::standard(2);
  Rng rng(3);
  for (int m : {1, 2, 4}) {
    const Vec q = uniform_ball_cloud(rng, m, 2, 1.0);
    const double a = value(model, interacting(), 0.7, q).value;
    const double b = value(model, interacting(), 0.7, q, ValueMethod::Direct).value;
    CHECK(std::abs(a - b) < 1e-5);
  }
}

TEST_CASE("wasserstein gradient") {
  const auto model = HamiltonianModel::standard(2);
  Rng rng(4);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 3, 2, 1.0), 2);
  const auto w = WeightedMeasure::uniform(mu);
  const Vec g0 = wasserstein_gradient(model, interacting(), 0.0, mu);
  for (int i = 0; i < 3; ++i)
    CHECK((particle(g0, i, 2) - interacting().initial().pointwise_gradient(mu.point(i), w)).norm() < 1e-12);
  const Vec g = wasserstein_gradient(model, interacting(), 0.5, mu);
  CHECK((g - wasserstein_gradient_fd(model, interacting(), 0.5, mu)).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("Hessian kernel") {
  const auto model = HamiltonianModel::standard(2);
  Vec q(4);
  q << 0.3, -0.2, -0.5, 0.4;
  const EmpiricalMeasure mu(q, 2);
  const auto hk = hessian_kernel(model, interacting(), 0.0, mu);
  Vec diff(2);
  diff << 0.8, -0.6;
  // m^2 times the cross block of U0^(m) is -D^2 phi1(q_i - q_j)
  CHECK((hk.lambda1_block(0, 1) + gaussian_function(0.5)->hessian(diff)).cwiseAbs().maxCoeff() < 1e-4);
  const auto later = hessian_kernel(model, interacting(), 0.5, mu);
  CHECK(later.lambda0_asymmetry <= 1e-6);
  const auto var = hessian_kernel(model, interacting(), 0.5, mu, HessianMethod::Variational);
  CHECK((var.hessian - later.hessian).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("HJ residual with interaction") {
  const auto model = HamiltonianModel::standard(2);
  Rng rng(5);
  const Vec q = uniform_ball_cloud(rng, 2, 2, 1.0);
  CHECK(hj_residual(model, interacting(), 0.5, q) < 1e-4);
  // a constant running cost shifts value and time derivative together
  const DataModel shifted(quadratic_function(1.5), gaussian_function(0.5),
                          testing::constant(0.7), zero_function());
  const DataModel coupled(quadratic_function(1.5), gaussian_function(0.5), zero_function(),
                          gaussian_function(0.3));
  CHECK(hj_residual(model, coupled, 0.5, q) < 1e-4);
  CHECK(std::abs(hj_residual(model, shifted, 0.5, q) - hj_residual(model, interacting(), 0.5, q)) < 1e-6);
}

TEST_CASE("scaling study on decoupled data") {
  const auto model = HamiltonianModel::standard(1);
  ScalingOptions opt;
  opt.ms = {4, 8, 16};
  opt.seeds = 2;
  opt.time_derivative = false;
  const auto rep = scaling_study(model, quadratic(), opt);
  for (const auto& c : rep.classes)
    if (c.name == "hessian_off")
      for (double v : c.max_abs) CHECK(v == 0.0);
  CHECK(rep.to_csv().rfind("m,class,max_abs,target_slope,fitted_slope,pass\r\n", 0) == 0);
  CHECK(fit_loglog_slope({1, 2, 4}, {1, 0.25, 0.0625}) == doctest::Approx(-2.0));
}

TEST_CASE("convexity evolution") {
  const auto model = HamiltonianModel::standard(2);
  Rng rng(6);
  const EmpiricalMeasure mu(uniform_ball_cloud(rng, 4, 2, 1.0), 2);
  const auto ev = convexity_evolution(model, quadratic(), {0.0, 0.5, 1.0}, mu);
  for (std::size_t k = 0; k < ev.times.size(); ++k)
    CHECK(ev.min_eigenvalue[k] == doctest::Approx(1.0 / (4 * (1 + ev.times[k]))).epsilon(1e-5));
  const DataModel convex(quadratic_function(2.0), gaussian_function(0.3));
  CHECK(convexity_evolution(model, convex, {0.25, 0.5, 1.0}, mu).passed);
}
