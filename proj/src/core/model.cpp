#include "mfglab/model.hpp"

#include "mfglab/errors.hpp"
#include "mfglab/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mfglab {

HamiltonianModel::HamiltonianModel(int dimension, Mat kinetic, FunctionPtr potential)
    : d_(dimension), a_(std::move(kinetic)), g_(std::move(potential)) {
  if (d_ < 1) throw ModelError("dimension must be positive");
  if (!g_) throw ModelError("missing potential");
  if (a_.rows() != d_ || a_.cols() != d_) throw ModelError("kinetic matrix must be d x d");
  if (!a_.allFinite()) throw ModelError("kinetic matrix has non-finite entries");
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a_.cwiseAbs().maxCoeff()))
    throw ModelError("kinetic matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(a_, Eigen::EigenvaluesOnly);
  kappa3_ = es.eigenvalues().minCoeff();
  if (!(kappa3_ > 0.0)) throw ModelError("kinetic matrix is not positive definite");
  a_inv_ = a_.inverse();
  a_inv_ = 0.5 * (a_inv_ + a_inv_.transpose());
}

HamiltonianModel HamiltonianModel::standard(int dimension, FunctionPtr potential) {
  if (dimension < 1) throw ModelError("dimension must be positive");
  return HamiltonianModel(dimension, Mat::Identity(dimension, dimension), std::move(potential));
}

HamiltonianModel HamiltonianModel::from_json(const nlohmann::json& spec) {
  if (!spec.is_object()) throw ConfigError("model block must be an object");
  if (!spec.contains("dimension") || !spec.at("dimension").is_number_integer())
    throw ConfigError("model.dimension must be an integer");
  const int d = spec.at("dimension").get<int>();
  if (d < 1 || d > 3) throw ConfigError("model.dimension must be in 1..3");
  Mat a = Mat::Identity(d, d);
  if (spec.contains("kinetic")) {
    const auto& k = spec.at("kinetic");
    if (k.is_number()) {
      a *= k.get<double>();
    } else if (k.is_array() && k.size() == static_cast<std::size_t>(d)) {
      for (int r = 0; r < d; ++r) {
        if (!k.at(r).is_array() || k.at(r).size() != static_cast<std::size_t>(d))
          throw ConfigError("model.kinetic must be a scalar or a d x d matrix");
        for (int c = 0; c < d; ++c) a(r, c) = k.at(r).at(c).get<double>();
      }
    } else {
      throw ConfigError("model.kinetic must be a scalar or a d x d matrix");
    }
  }
  FunctionPtr g = spec.contains("potential") ? function_from_json(spec.at("potential"))
                                             : zero_function();
  try {
    return HamiltonianModel(d, a, g);
  } catch (const ModelError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

nlohmann::json HamiltonianModel::to_json() const {
  nlohmann::json k = nlohmann::json::array();
  for (int r = 0; r < d_; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < d_; ++c) row.push_back(a_(r, c));
    k.push_back(row);
  }
  return {{"dimension", d_}, {"kinetic", k}, {"potential", g_->to_json()}};
}

double HamiltonianModel::H(const Vec& q, const Vec& p) const {
  return 0.5 * p.dot(a_inv_ * p) - g_->value(q);
}

double HamiltonianModel::L(const Vec& q, const Vec& v) const {
  return 0.5 * v.dot(a_ * v) + g_->value(q);
}

Vec HamiltonianModel::dpH(const Vec&, const Vec& p) const { return a_inv_ * p; }
Vec HamiltonianModel::dqH(const Vec& q, const Vec&) const { return -g_->gradient(q); }
Vec HamiltonianModel::dvL(const Vec&, const Vec& v) const { return a_ * v; }
Vec HamiltonianModel::dqL(const Vec& q, const Vec&) const { return g_->gradient(q); }

namespace {

Mat joint_hessian(const Mat& qq, const Mat& pp) {
  const auto d = qq.rows();
  Mat h = Mat::Zero(2 * d, 2 * d);
  h.topLeftCorner(d, d) = qq;
  h.bottomRightCorner(d, d) = pp;
  return h;
}

Tensor3 joint_third(const Tensor3& qqq, double sign) {
  const int d = qqq.dim();
  Tensor3 t(2 * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) t(a, b, c) = sign * qqq(a, b, c);
  return t;
}

}  // namespace

Mat HamiltonianModel::hessian_H(const Vec& q, const Vec&) const {
  return joint_hessian(-g_->hessian(q), a_inv_);
}

Mat HamiltonianModel::hessian_L(const Vec& q, const Vec&) const {
  return joint_hessian(g_->hessian(q), a_);
}

Tensor3 HamiltonianModel::third_H(const Vec& q, const Vec&) const {
  return joint_third(g_->third(q), -1.0);
}

Tensor3 HamiltonianModel::third_L(const Vec& q, const Vec&) const {
  return joint_third(g_->third(q), 1.0);
}

void AuditRegion::validate() const {
  if (!(radius > 0.0)) throw InvalidInput("audit radius must be positive");
  if (samples < 1) throw InvalidInput("audit sample count must be at least 1");
}

AuditReport legendre_check(const HamiltonianModel& model, const AuditRegion& region,
                           double tolerance) {
  region.validate();
  Rng rng(region.seed);
  const int d = model.dimension();
  double duality = 0.0, round_v = 0.0, round_p = 0.0;
  for (int s = 0; s < region.samples; ++s) {
    const Vec q = uniform_ball(rng, d, region.radius);
    const Vec v = uniform_ball(rng, d, region.radius);
    const Vec p = model.dvL(q, v);
    duality = std::max(duality, std::abs(model.H(q, p) - v.dot(p) + model.L(q, v)));
    round_v = std::max(round_v, (model.dpH(q, p) - v).norm());
    const Vec p2 = uniform_ball(rng, d, region.radius);
    round_p = std::max(round_p, (model.dvL(q, model.dpH(q, p2)) - p2).norm());
  }
  AuditReport r;
  r.name = "legendre";
  r.tolerance = tolerance;
  r.worst = std::max({duality, round_v, round_p});
  r.passed = r.worst <= tolerance;
  r.details = {{"duality_defect", duality},
               {"round_trip_v", round_v},
               {"round_trip_p", round_p},
               {"kappa3", model.kappa3()}};
  return r;
}

namespace {

constexpr double kStep1 = 1e-4;
constexpr double kStep2 = 1e-3;
constexpr double kStep3 = 5e-3;

struct JointAccess {
  const HamiltonianModel& model;
  bool hamiltonian;
  int d() const { return model.dimension(); }
  double value(const Vec& x) const {
    const Vec q = x.head(d()), w = x.tail(d());
    return hamiltonian ? model.H(q, w) : model.L(q, w);
  }
  Vec gradient(const Vec& x) const {
    const Vec q = x.head(d()), w = x.tail(d());
    Vec g(2 * d());
    if (hamiltonian) {
      g << model.dqH(q, w), model.dpH(q, w);
    } else {
      g << model.dqL(q, w), model.dvL(q, w);
    }
    return g;
  }
  Mat hessian(const Vec& x) const {
    const Vec q = x.head(d()), w = x.tail(d());
    return hamiltonian ? model.hessian_H(q, w) : model.hessian_L(q, w);
  }
  Tensor3 third(const Vec& x) const {
    const Vec q = x.head(d()), w = x.tail(d());
    return hamiltonian ? model.third_H(q, w) : model.third_L(q, w);
  }
};

double rel(double fd, double exact) { return std::abs(fd - exact) / std::max(1.0, std::abs(exact)); }

// worst relative defect of each order at x
std::array<double, 3> derivative_defects(const JointAccess& f, const Vec& x) {
  const int n = static_cast<int>(x.size());
  std::array<double, 3> worst{0.0, 0.0, 0.0};
  const Vec g = f.gradient(x);
  const Mat h = f.hessian(x);
  const Tensor3 t = f.third(x);
  for (int c = 0; c < n; ++c) {
    Vec xp = x, xm = x;
    xp(c) += kStep1;
    xm(c) -= kStep1;
    worst[0] = std::max(worst[0], rel((f.value(xp) - f.value(xm)) / (2 * kStep1), g(c)));
    xp = x;
    xm = x;
    xp(c) += kStep2;
    xm(c) -= kStep2;
    const Vec dg = (f.gradient(xp) - f.gradient(xm)) / (2 * kStep2);
    for (int a = 0; a < n; ++a) worst[1] = std::max(worst[1], rel(dg(a), h(a, c)));
    xp = x;
    xm = x;
    xp(c) += kStep3;
    xm(c) -= kStep3;
    const Mat dh = (f.hessian(xp) - f.hessian(xm)) / (2 * kStep3);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) worst[2] = std::max(worst[2], rel(dh(a, b), t(a, b, c)));
  }
  return worst;
}

}  // namespace

AuditReport derivative_check(const HamiltonianModel& model, const AuditRegion& region,
                             double tolerance) {
  region.validate();
  Rng rng(region.seed);
  const int d = model.dimension();
  std::array<double, 3> worst{0.0, 0.0, 0.0};
  double growth = 0.0, kappa0 = 0.0, min_lagrangian = std::numeric_limits<double>::infinity();
  bool potential_nonneg = true;
  for (int s = 0; s < region.samples; ++s) {
    const Vec q = uniform_ball(rng, d, region.radius);
    const Vec w = uniform_ball(rng, d, region.radius);
    Vec x(2 * d);
    x << q, w;
    for (bool ham : {true, false}) {
      const auto defects = derivative_defects(JointAccess{model, ham}, x);
      for (int k = 0; k < 3; ++k) worst[k] = std::max(worst[k], defects[k]);
      const Mat h = ham ? model.hessian_H(q, w) : model.hessian_L(q, w);
      Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
      kappa0 = std::max(kappa0, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    growth = std::max(growth, model.dqH(q, w).norm() / (1.0 + q.norm() + w.norm()));
    if (model.potential().value(q) < 0.0) potential_nonneg = false;
    min_lagrangian = std::min(min_lagrangian, model.L(q, w));
  }
  AuditReport r;
  r.name = "derivatives";
  r.tolerance = tolerance;
  r.worst = std::max({worst[0], worst[1], worst[2]});
  r.passed = r.worst < tolerance;
  r.details = {{"first", worst[0]},
               {"second", worst[1]},
               {"third", worst[2]},
               {"growth_constant", growth},
               {"kappa0", kappa0},
               {"potential_nonnegative_on_samples", potential_nonneg},
               {"lagrangian_nonnegative", min_lagrangian >= 0.0},
               {"min_lagrangian", min_lagrangian}};
  return r;
}

}  // namespace mfglab
