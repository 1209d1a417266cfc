#include "mfglab/master.hpp"

#include "mfglab/errors.hpp"
#include "mfglab/value.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfglab {

namespace odeint = boost::numeric::odeint;

EmpiricalMeasure MeasurePath::at(std::size_t k) const {
  return EmpiricalMeasure(trajectory.xi.at(k), trajectory.d);
}

double MeasurePath::fitted_speed() const {
  double speed = 0.0;
  for (std::size_t k = 1; k < trajectory.times.size(); ++k) {
    const double dt = trajectory.times[k] - trajectory.times[k - 1];
    speed = std::max(speed, w2_distance(at(k - 1), at(k)).distance / dt);
  }
  return speed;
}

double MeasurePath::max_second_moment() const {
  double s = 0.0;
  for (std::size_t k = 0; k < trajectory.times.size(); ++k) s = std::max(s, second_moment(at(k)));
  return s;
}

MeasurePath measure_flow(const HamiltonianModel& model, const DataModel& data,
                         const EmpiricalMeasure& mu, double t, int steps) {
  if (mu.dimension() != model.dimension()) throw InvalidInput("measure dimension mismatch");
  return {solve_bvp(model, data, mu.config(), t, steps)};
}

namespace {

using Stepper = odeint::runge_kutta4<Vec, double, Vec, double, odeint::vector_space_algebra>;

WeightedMeasure uniform_measure(const Vec& points, int d) {
  const int m = static_cast<int>(points.size()) / d;
  return {points, std::vector<double>(m, 1.0 / m), d};
}

// Single agent against the population flow. Packed state:
// [xi (n), eta (n), S (d), P (d), cost (1), dS (d x d), dP (d x d)].
class AgentSystem {
 public:
  AgentSystem(const HamiltonianModel& model, const DataModel& data, int n)
      : model_(model), data_(data), n_(n), d_(model.dimension()) {}

  int size() const { return 2 * n_ + 2 * d_ + 1 + 2 * d_ * d_; }
  int s_offset() const { return 2 * n_; }
  int p_offset() const { return 2 * n_ + d_; }
  int cost_offset() const { return 2 * n_ + 2 * d_; }
  int ds_offset() const { return cost_offset() + 1; }
  int dp_offset() const { return ds_offset() + d_ * d_; }

  void operator()(const Vec& y, Vec& dy, double) const {
    dy.resize(y.size());
    const Vec xi = y.segment(0, n_), eta = y.segment(n_, n_);
    Vec dxi, deta;
    phase_vector_field(model_, data_, xi, eta, dxi, deta);
    dy.segment(0, n_) = dxi;
    dy.segment(n_, n_) = deta;
    const Vec s = y.segment(s_offset(), d_), p = y.segment(p_offset(), d_);
    const Vec v = model_.dpH(s, p);
    dy.segment(s_offset(), d_) = v;
    Vec force = -model_.dqH(s, p);
    double running = model_.L(s, v);
    Mat fh = Mat::Zero(d_, d_);
    if (!data_.coupling().is_zero()) {
      const WeightedMeasure sigma = uniform_measure(xi, d_);
      force += data_.coupling().pointwise_gradient(s, sigma);
      running += data_.coupling().pointwise(s, sigma);
      fh = data_.coupling().pointwise_hessian(s, sigma);
    }
    dy.segment(p_offset(), d_) = force;
    dy(cost_offset()) = running;
    Eigen::Map<const Mat> ds(y.data() + ds_offset(), d_, d_);
    Eigen::Map<const Mat> dp(y.data() + dp_offset(), d_, d_);
    const Mat hqq = model_.hessian_H(s, p).topLeftCorner(d_, d_);
    Eigen::Map<Mat>(dy.data() + ds_offset(), d_, d_) = model_.kinetic_inverse() * dp;
    Eigen::Map<Mat>(dy.data() + dp_offset(), d_, d_) = (-hqq + fh) * ds;
  }

 private:
  const HamiltonianModel& model_;
  const DataModel& data_;
  int n_, d_;
};

struct Population {
  Vec z;
  Vec eta0;
};

Population population_start(const HamiltonianModel& model, const DataModel& data,
                            const EmpiricalMeasure& mu, double t, int steps, const Vec* warm) {
  const InversionResult inv = invert_flow(model, data, mu.config(), t, steps, warm);
  return {inv.z, data.initial().restricted_gradient(inv.z, mu.dimension())};
}

struct ShotResult {
  double miss = std::numeric_limits<double>::infinity();
  Vec terminal, costate;
  Mat jacobian;
  double u = 0.0;
  std::vector<double> times;
  std::vector<Vec> path;
};

ShotResult shoot(const HamiltonianModel& model, const DataModel& data, const Population& pop,
                 const Vec& x, const Vec& q0, double t, int steps) {
  const int d = model.dimension();
  const int n = static_cast<int>(pop.z.size());
  AgentSystem sys(model, data, n);
  Vec y = Vec::Zero(sys.size());
  y.segment(0, n) = pop.z;
  y.segment(n, n) = pop.eta0;
  const WeightedMeasure sigma0 = uniform_measure(pop.z, d);
  y.segment(sys.s_offset(), d) = x;
  y.segment(sys.p_offset(), d) = data.initial().pointwise_gradient(x, sigma0);
  y(sys.cost_offset()) = data.initial().pointwise(x, sigma0);
  Eigen::Map<Mat>(y.data() + sys.ds_offset(), d, d) = Mat::Identity(d, d);
  Eigen::Map<Mat>(y.data() + sys.dp_offset(), d, d) = data.initial().pointwise_hessian(x, sigma0);
  ShotResult r;
  r.times.push_back(0.0);
  r.path.push_back(x);
  Stepper stepper;
  const double h = t / steps;
  for (int s = 0; s < steps; ++s) {
    stepper.do_step(sys, y, s * h, h);
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e12) return r;
    r.times.push_back(s + 1 == steps ? t : (s + 1) * h);
    r.path.push_back(y.segment(sys.s_offset(), d));
  }
  r.terminal = y.segment(sys.s_offset(), d);
  r.costate = y.segment(sys.p_offset(), d);
  r.u = y(sys.cost_offset());
  r.jacobian = Eigen::Map<const Mat>(y.data() + sys.ds_offset(), d, d);
  r.miss = (r.terminal - q0).norm();
  return r;
}

bool shooting(const HamiltonianModel& model, const DataModel& data, const Population& pop,
              const Vec& q0, double t, int steps, MasterSample& out) {
  const double tol = 1e-9 * (1.0 + q0.norm());
  Vec x = q0;
  ShotResult cur = shoot(model, data, pop, x, q0, t, steps);
  if (!std::isfinite(cur.miss)) return false;
  int polish = 0;
  for (int it = 0; it < 60; ++it) {
    if (cur.miss <= tol && (polish++ >= 2 || cur.miss <= 1e-15 * (1.0 + q0.norm()))) break;
    const Vec step = cur.jacobian.partialPivLu().solve(cur.terminal - q0);
    bool improved = false;
    if (step.allFinite()) {
      double scale = 1.0;
      for (int half = 0; half < 30; ++half, scale *= 0.5) {
        ShotResult trial = shoot(model, data, pop, x - scale * step, q0, t, steps);
        if (trial.miss < cur.miss) {
          x -= scale * step;
          cur = std::move(trial);
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      if (cur.miss <= tol) break;
      const Vec xr = x - 0.5 * (cur.terminal - q0);
      ShotResult trial = shoot(model, data, pop, xr, q0, t, steps);
      if (!std::isfinite(trial.miss)) return false;
      x = xr;
      cur = std::move(trial);
    }
  }
  if (!(cur.miss <= tol)) return false;
  out.u = cur.u;
  out.costate = cur.costate;
  out.times = std::move(cur.times);
  out.path = std::move(cur.path);
  out.method = AgentMethod::Shooting;
  return true;
}

// Discretised single-agent action on nodes gamma_0..gamma_N (gamma_N = q0)
// against population samples at the node times; dense Newton.
struct AgentDirect {
  double u;
  Vec costate;
  std::vector<Vec> nodes;
};

AgentDirect agent_direct(const HamiltonianModel& model, const DataModel& data,
                         const Population& pop, const Vec& q0, double t, int nodes, int steps) {
  const int d = model.dimension();
  const int refine = std::max(1, (steps + nodes - 1) / nodes);
  const PhaseTrajectory traj =
      integrate_phase(model, data, pop.z, pop.eta0, t, nodes * refine);
  std::vector<WeightedMeasure> sigma;
  for (int k = 0; k <= nodes; ++k) sigma.push_back(uniform_measure(traj.xi[k * refine], d));
  const double h = t / nodes;
  const Mat kin = model.kinetic() / h;
  const bool coupled = !data.coupling().is_zero();
  auto weight = [&](int k) { return (k == 0 || k == nodes) ? 0.5 : 1.0; };
  auto node = [&](const Vec& x, int k) -> Vec { return k == nodes ? q0 : Vec(x.segment(k * d, d)); };
  auto pot = [&](const Vec& y, int k) {
    double s = model.potential().value(y);
    if (coupled) s += data.coupling().pointwise(y, sigma[k]);
    return s;
  };
  auto pot_grad = [&](const Vec& y, int k) {
    Vec g = model.potential().gradient(y);
    if (coupled) g += data.coupling().pointwise_gradient(y, sigma[k]);
    return g;
  };
  auto pot_hess = [&](const Vec& y, int k) {
    Mat g = model.potential().hessian(y);
    if (coupled) g += data.coupling().pointwise_hessian(y, sigma[k]);
    return g;
  };
  auto action = [&](const Vec& x) {
    double s = data.initial().pointwise(node(x, 0), sigma[0]);
    for (int k = 0; k < nodes; ++k) {
      const Vec dx = node(x, k + 1) - node(x, k);
      s += 0.5 * dx.dot(kin * dx);
    }
    for (int k = 0; k <= nodes; ++k) s += h * weight(k) * pot(node(x, k), k);
    return s;
  };
  const int n = nodes * d;
  Vec x(n);
  for (int k = 0; k < nodes; ++k) x.segment(k * d, d) = q0;
  double f = action(x);
  for (int it = 0; it < 200; ++it) {
    Vec g = Vec::Zero(n);
    Mat hs = Mat::Zero(n, n);
    g.segment(0, d) += data.initial().pointwise_gradient(node(x, 0), sigma[0]);
    hs.block(0, 0, d, d) += data.initial().pointwise_hessian(node(x, 0), sigma[0]);
    for (int k = 0; k < nodes; ++k) {
      const Vec fk = kin * (node(x, k + 1) - node(x, k));
      g.segment(k * d, d) -= fk;
      hs.block(k * d, k * d, d, d) += kin;
      if (k + 1 < nodes) {
        g.segment((k + 1) * d, d) += fk;
        hs.block((k + 1) * d, (k + 1) * d, d, d) += kin;
        hs.block(k * d, (k + 1) * d, d, d) -= kin;
        hs.block((k + 1) * d, k * d, d, d) -= kin;
      }
      g.segment(k * d, d) += h * weight(k) * pot_grad(node(x, k), k);
      hs.block(k * d, k * d, d, d) += h * weight(k) * pot_hess(node(x, k), k);
    }
    Eigen::LDLT<Mat> ldlt(hs);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw OptimizationFailure("direct path minimisation: indefinite Hessian");
    const Vec step = ldlt.solve(g);
    const double dec = g.dot(step);
    if (dec < 1e-12 * (1.0 + std::abs(f))) {
      // inside the quadratic convergence region the action can no longer
      // resolve progress; finish with full steps
      x -= step;
      f = action(x);
      if (dec < 1e-24 * (1.0 + std::abs(f))) break;
      continue;
    }
    double alpha = 1.0;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const double ft = action(x - alpha * step);
      if (ft <= f - 1e-4 * alpha * dec) {
        x -= alpha * step;
        f = ft;
        ok = true;
        break;
      }
    }
    if (!ok) {
      if (dec < 1e-18 * (1.0 + std::abs(f))) break;
      throw OptimizationFailure("direct path minimisation: line search failed");
    }
    if (it == 199) throw OptimizationFailure("direct path minimisation did not converge");
  }
  AgentDirect r;
  r.u = f;
  r.costate = kin * (q0 - node(x, nodes - 1)) + 0.5 * h * pot_grad(q0, nodes);
  for (int k = 0; k <= nodes; ++k) r.nodes.push_back(node(x, k));
  return r;
}

}  // namespace

MasterSample master_value(const HamiltonianModel& model, const DataModel& data, double t,
                          const Vec& q0, const EmpiricalMeasure& mu, const MasterOptions& opt,
                          const Vec* population_warm_start) {
  const int d = model.dimension();
  if (mu.dimension() != d || q0.size() != d) throw InvalidInput("dimension mismatch");
  if (!q0.allFinite()) throw InvalidInput("q0 must be finite");
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("time must be nonnegative");
  MasterSample out;
  out.t = t;
  out.q0 = q0;
  if (t == 0.0) {
    const WeightedMeasure w = WeightedMeasure::uniform(mu);
    out.u = data.initial().pointwise(q0, w);
    out.costate = data.initial().pointwise_gradient(q0, w);
    out.times = {0.0};
    out.path = {q0};
    out.population_start = mu.config();
    return out;
  }
  const int steps = opt.steps > 0 ? opt.steps : default_steps(t);
  const Population pop = population_start(model, data, mu, t, steps, population_warm_start);
  out.population_start = pop.z;
  if (!opt.force_direct && shooting(model, data, pop, q0, t, steps, out)) return out;
  try {
    const AgentDirect coarse = agent_direct(model, data, pop, q0, t, 64, steps);
    const AgentDirect fine = agent_direct(model, data, pop, q0, t, 128, steps);
    out.u = (4.0 * fine.u - coarse.u) / 3.0;
    out.costate = 2.0 * fine.costate - coarse.costate;
    out.method = AgentMethod::Direct;
    out.times.clear();
    out.path = fine.nodes;
    for (std::size_t k = 0; k < fine.nodes.size(); ++k)
      out.times.push_back(t * static_cast<double>(k) / (fine.nodes.size() - 1));
  } catch (const OptimizationFailure& e) {
    throw OptimizationFailure(std::string("master value: shooting and direct minimisation failed: ") +
                              e.what());
  }
  return out;
}

double restricted_particle_value(const HamiltonianModel& model, const DataModel& data, double t,
                                 const EmpiricalMeasure& mu, int i, int steps) {
  const int d = mu.dimension();
  if (i < 0 || i >= mu.m()) throw InvalidInput("particle index out of range");
  const PhaseTrajectory traj = solve_bvp(model, data, mu.config(), t, steps);
  const int m = traj.m;
  auto running = [&](std::size_t k) {
    const Vec s = particle(traj.xi[k], i, d);
    const Vec v = model.dpH(s, static_cast<double>(m) * particle(traj.eta[k], i, d));
    double r = model.L(s, v);
    if (!data.coupling().is_zero())
      r += data.coupling().pointwise(s, uniform_measure(traj.xi[k], d));
    return r;
  };
  double u = data.initial().pointwise(particle(traj.xi[0], i, d), uniform_measure(traj.xi[0], d));
  const std::size_t count = traj.times.size();
  if (count < 3) return u;
  const double h = traj.times[1] - traj.times[0];
  for (std::size_t k = 2; k < count; k += 2)
    u += h / 3.0 * (running(k - 2) + 4.0 * running(k - 1) + running(k));
  return u;
}

MasterGradient master_gradient(const HamiltonianModel& model, const DataModel& data, double t,
                               const Vec& q0, const EmpiricalMeasure& mu,
                               const MasterOptions& opt) {
  const int d = mu.dimension();
  const int m = mu.m();
  MasterOptions fixed = opt;
  if (fixed.steps <= 0) fixed.steps = default_steps(t);
  const MasterSample base = master_value(model, data, t, q0, mu, fixed);
  MasterGradient g;
  g.u = base.u;
  g.dq0u.resize(d);
  const double h0 = 1e-4 * (1.0 + q0.norm());
  for (int c = 0; c < d; ++c) {
    Vec qp = q0, qm = q0;
    qp(c) += h0;
    qm(c) -= h0;
    const double up = master_value(model, data, t, qp, mu, fixed, &base.population_start).u;
    const double um = master_value(model, data, t, qm, mu, fixed, &base.population_start).u;
    g.dq0u(c) = (up - um) / (2.0 * h0);
  }
  g.phi1.resize(m * d);
  for (int i = 0; i < m; ++i) {
    const double h = 1e-4 * (1.0 + mu.point(i).norm());
    for (int c = 0; c < d; ++c) {
      Vec cp = mu.config(), cm = mu.config();
      cp(i * d + c) += h;
      cm(i * d + c) -= h;
      const double up =
          master_value(model, data, t, q0, EmpiricalMeasure(cp, d), fixed, &base.population_start).u;
      const double um =
          master_value(model, data, t, q0, EmpiricalMeasure(cm, d), fixed, &base.population_start).u;
      g.phi1(i * d + c) = m * (up - um) / (2.0 * h);
    }
  }
  if (t > 0.0) {
    const double dt = 1e-3 * t;
    const double up = master_value(model, data, t + dt, q0, mu, fixed, &base.population_start).u;
    const double um = master_value(model, data, t - dt, q0, mu, fixed, &base.population_start).u;
    g.dtu = (up - um) / (2.0 * dt);
  }
  return g;
}

double scalar_master_residual(const HamiltonianModel& model, const DataModel& data,
                              const Vec& q0, const EmpiricalMeasure& mu, const MasterGradient& g,
                              const Vec& wgrad) {
  const int d = mu.dimension();
  const int m = mu.m();
  double transport = 0.0;
  for (int i = 0; i < m; ++i)
    transport += particle(g.phi1, i, d).dot(model.dpH(mu.point(i), particle(wgrad, i, d)));
  transport /= m;
  const double f = data.coupling().is_zero()
                       ? 0.0
                       : data.coupling().pointwise(q0, WeightedMeasure::uniform(mu));
  return std::abs(g.dtu + model.H(q0, g.dq0u) + transport - f);
}

double scalar_master_residual(const HamiltonianModel& model, const DataModel& data, double t,
                              const Vec& q0, const EmpiricalMeasure& mu, const MasterOptions& opt) {
  if (!(t > 0.0)) throw InvalidInput("master residual needs t > 0");
  MasterOptions fixed = opt;
  if (fixed.steps <= 0) fixed.steps = default_steps(t);
  const MasterGradient g = master_gradient(model, data, t, q0, mu, fixed);
  const Vec wgrad = wasserstein_gradient(model, data, t, mu, fixed.steps);
  return scalar_master_residual(model, data, q0, mu, g, wgrad);
}

double vectorial_master_residual(const HamiltonianModel& model, const DataModel& data, double t,
                                 const EmpiricalMeasure& mu, int i, int steps) {
  if (!(t > 0.0)) throw InvalidInput("master residual needs t > 0");
  const int d = mu.dimension();
  const int m = mu.m();
  if (i < 0 || i >= m) throw InvalidInput("particle index out of range");
  if (steps <= 0) steps = default_steps(t);
  const double dt = 1e-3 * t;
  const Vec v = wasserstein_gradient(model, data, t, mu, steps);
  const Vec vp = wasserstein_gradient(model, data, t + dt, mu, steps);
  const Vec vm = wasserstein_gradient(model, data, t - dt, mu, steps);
  const Vec dtv = particle(vp - vm, i, d) / (2.0 * dt);
  const HessianKernel k = hessian_kernel(model, data, t, mu, HessianMethod::FiniteDifference, steps);
  const Vec qi = mu.point(i);
  const Vec vi = particle(v, i, d);
  Vec r = dtv + model.dqH(qi, vi) + k.lambda0[i] * model.dpH(qi, vi);
  for (int j = 0; j < m; ++j) {
    if (j == i) continue;
    r += k.lambda1_block(i, j) * model.dpH(mu.point(j), particle(v, j, d)) / m;
  }
  if (!data.coupling().is_zero())
    r -= data.coupling().pointwise_gradient(qi, WeightedMeasure::uniform(mu));
  return r.norm();
}

HopfLaxResult counterexample_hopf_lax(double t, double q) {
  if (!(t > 0.0) || !std::isfinite(t) || !std::isfinite(q))
    throw InvalidInput("counterexample needs t > 0 and finite q");
  const double range = std::abs(q) + t + 2.0;
  auto critical = [&](double y) { return (y - q) / t - y / std::sqrt(1.0 + y * y); };
  auto objective = [&](double y) { return (y - q) * (y - q) / (2.0 * t) - std::sqrt(1.0 + y * y); };

  HopfLaxResult r;
  r.t = t;
  r.q = q;
  constexpr int kCells = 4096;
  const double w = 2.0 * range / kCells;
  double a = -range, fa = critical(a);
  for (int c = 1; c <= kCells; ++c) {
    const double b = (c == kCells) ? range : -range + c * w;
    const double fb = critical(b);
    if (fa == 0.0) {
      r.critical_points.push_back(a);
    } else if (fa * fb < 0.0) {
      boost::uintmax_t iters = 200;
      const auto bracket = boost::math::tools::toms748_solve(
          critical, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
      r.critical_points.push_back(0.5 * (bracket.first + bracket.second));
    }
    a = b;
    fa = fb;
  }
  if (fa == 0.0) r.critical_points.push_back(a);
  if (r.critical_points.empty()) throw Error("counterexample: no critical point found");

  double best = std::numeric_limits<double>::infinity();
  for (double y : r.critical_points) best = std::min(best, objective(y));
  for (double y : r.critical_points)
    if (objective(y) <= best + 1e-12 * (1.0 + std::abs(best))) r.minimizers.push_back(y);
  r.value = best;
  r.superdiff_lo = std::numeric_limits<double>::infinity();
  r.superdiff_hi = -std::numeric_limits<double>::infinity();
  for (double y : r.minimizers) {
    r.superdiff_lo = std::min(r.superdiff_lo, (q - y) / t);
    r.superdiff_hi = std::max(r.superdiff_hi, (q - y) / t);
  }
  return r;
}

}  // namespace mfglab
