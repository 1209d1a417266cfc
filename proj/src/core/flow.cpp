#include "mfglab/flow.hpp"

#include "mfglab/errors.hpp"

#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>
#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace mfglab {

namespace odeint = boost::numeric::odeint;

namespace {

constexpr double kBlowUp = 1e12;

using Stepper = odeint::runge_kutta4<Vec, double, Vec, double, odeint::vector_space_algebra>;

// Packed state: [xi (n), eta (n), Jxi (n x k, column-major), Jeta (n x k)].
class PhaseSystem {
 public:
  PhaseSystem(const HamiltonianModel& model, const DataModel& data, int m, int k)
      : model_(model), data_(data), m_(m), d_(model.dimension()), n_(m * model.dimension()), k_(k) {}

  int state_size() const { return 2 * n_ + 2 * n_ * k_; }

  void operator()(const Vec& y, Vec& dy, double) const {
    dy.resize(y.size());
    const int d = d_;
    const double m = m_;
    const Mat& a_inv = model_.kinetic_inverse();
    const auto xi = y.segment(0, n_);
    const auto eta = y.segment(n_, n_);
    const bool coupled = !data_.coupling().is_zero();
    const Vec xi_v = xi;
    Vec force;
    if (coupled) force = data_.coupling().restricted_gradient(xi_v, d);
    for (int i = 0; i < m_; ++i) {
      const Vec q = xi.segment(i * d, d);
      const Vec p = m * eta.segment(i * d, d);
      dy.segment(i * d, d) = model_.dpH(q, p);
      Vec f = -model_.dqH(q, p) / m;
      if (coupled) f += force.segment(i * d, d);
      dy.segment(n_ + i * d, d) = f;
    }
    if (k_ == 0) return;
    Eigen::Map<const Mat> jxi(y.data() + 2 * n_, n_, k_);
    Eigen::Map<const Mat> jeta(y.data() + 2 * n_ + n_ * k_, n_, k_);
    Eigen::Map<Mat> djxi(dy.data() + 2 * n_, n_, k_);
    Eigen::Map<Mat> djeta(dy.data() + 2 * n_ + n_ * k_, n_, k_);
    const bool curved = !model_.potential_is_zero();
    for (int i = 0; i < m_; ++i) {
      djxi.middleRows(i * d, d).noalias() = (m * a_inv) * jeta.middleRows(i * d, d);
      if (curved) {
        const Vec q = xi.segment(i * d, d);
        // D^2_qq H = -D^2 g; D^2_pq H vanishes for mechanical models
        const Mat hqq = model_.hessian_H(q, Vec::Zero(d)).topLeftCorner(d, d);
        djeta.middleRows(i * d, d).noalias() = -(hqq / m) * jxi.middleRows(i * d, d);
      } else {
        djeta.middleRows(i * d, d).setZero();
      }
    }
    if (coupled) djeta.noalias() += data_.coupling().restricted_hessian(xi_v, d) * jxi;
  }

 private:
  const HamiltonianModel& model_;
  const DataModel& data_;
  int m_, d_, n_, k_;
};

void check_state(const Vec& y, double time) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y(i);
    if (!std::isfinite(v) || std::abs(v) > kBlowUp)
      throw BlowUpError(time, fmt::format("phase state blew up at s = {:.6g}", time));
  }
}

int particle_count(const Vec& z, int d) {
  if (z.size() == 0 || z.size() % d != 0)
    throw InvalidInput("configuration size must be a positive multiple of the dimension");
  return static_cast<int>(z.size()) / d;
}

}  // namespace

void phase_vector_field(const HamiltonianModel& model, const DataModel& data, const Vec& xi,
                        const Vec& eta, Vec& dxi, Vec& deta) {
  const int d = model.dimension();
  const int m = particle_count(xi, d);
  PhaseSystem system(model, data, m, 0);
  Vec y(2 * xi.size()), dy;
  y << xi, eta;
  system(y, dy, 0.0);
  dxi = dy.head(xi.size());
  deta = dy.tail(xi.size());
}

int default_steps(double t) {
  const int s = static_cast<int>(std::ceil(256.0 * t - 1e-9));
  return std::max(2, s + (s % 2));
}

std::string PhaseTrajectory::to_csv() const {
  std::string out = "s,particle,coord,xi,eta\r\n";
  for (std::size_t k = 0; k < times.size(); ++k)
    for (int i = 0; i < m; ++i)
      for (int c = 0; c < d; ++c)
        out += fmt::format("{:.17g},{},{},{:.17g},{:.17g}\r\n", times[k], i, c, xi[k](i * d + c),
                           eta[k](i * d + c));
  return out;
}

PhaseTrajectory integrate_phase(const HamiltonianModel& model, const DataModel& data,
                                const Vec& xi0, const Vec& eta0, double t, int steps,
                                const Mat& j0xi, const Mat& j0eta) {
  const int d = model.dimension();
  const int m = particle_count(xi0, d);
  const int n = m * d;
  if (eta0.size() != n) throw InvalidInput("momentum size mismatch");
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("time horizon must be nonnegative");
  if (steps <= 0) steps = default_steps(t);
  const int k = static_cast<int>(j0xi.cols());
  if (k > 0 && (j0xi.rows() != n || j0eta.rows() != n || j0eta.cols() != k))
    throw InvalidInput("variational initial data shape mismatch");

  PhaseSystem system(model, data, m, k);
  Vec y(system.state_size());
  y.segment(0, n) = xi0;
  y.segment(n, n) = eta0;
  if (k > 0) {
    Eigen::Map<Mat>(y.data() + 2 * n, n, k) = j0xi;
    Eigen::Map<Mat>(y.data() + 2 * n + n * k, n, k) = j0eta;
  }
  check_state(y, 0.0);

  PhaseTrajectory traj;
  traj.m = m;
  traj.d = d;
  auto record = [&](double s) {
    traj.times.push_back(s);
    traj.xi.push_back(y.segment(0, n));
    traj.eta.push_back(y.segment(n, n));
    if (k > 0) {
      traj.dxi.push_back(Eigen::Map<const Mat>(y.data() + 2 * n, n, k));
      traj.deta.push_back(Eigen::Map<const Mat>(y.data() + 2 * n + n * k, n, k));
    }
  };
  record(0.0);
  if (t == 0.0) return traj;

  const double h = t / steps;
  Stepper stepper;
  for (int s = 0; s < steps; ++s) {
    stepper.do_step(system, y, s * h, h);
    const double time = (s + 1 == steps) ? t : (s + 1) * h;
    check_state(y, time);
    record(time);
  }
  return traj;
}

PhaseTrajectory integrate_forward(const HamiltonianModel& model, const DataModel& data,
                                  const Vec& z, double t, int steps, bool jacobian) {
  const int d = model.dimension();
  particle_count(z, d);
  const Vec eta0 = data.initial().restricted_gradient(z, d);
  if (!jacobian) return integrate_phase(model, data, z, eta0, t, steps);
  const auto n = z.size();
  return integrate_phase(model, data, z, eta0, t, steps, Mat::Identity(n, n),
                         data.initial().restricted_hessian(z, d));
}

PhaseTrajectory variational_integrate(const HamiltonianModel& model, const DataModel& data,
                                      const Vec& z, double t, int steps, int j) {
  const int d = model.dimension();
  const int m = particle_count(z, d);
  if (j < 0 || j >= m) throw InvalidInput("particle index out of range");
  const auto n = z.size();
  const Mat e = Mat::Identity(n, n).middleCols(j * d, d);
  const Mat h = data.initial().restricted_hessian(z, d).middleCols(j * d, d);
  return integrate_phase(model, data, z, data.initial().restricted_gradient(z, d), t, steps, e, h);
}

DeterminantReport jacobian_determinant(const HamiltonianModel& model, const DataModel& data,
                                       const Vec& z, double t, int steps) {
  const int d = model.dimension();
  if (steps <= 0) steps = default_steps(t);
  if (steps % 2) ++steps;
  const PhaseTrajectory traj = integrate_forward(model, data, z, t, steps, true);
  const int m = traj.m;
  const std::size_t count = traj.times.size();

  // tr A(s) = tr(diag(m D^2_pp H) D_z eta (D_z xi)^{-1}) for mechanical models
  std::vector<double> trace(count);
  std::vector<double> det(count);
  const Mat mass = static_cast<double>(m) * model.kinetic_inverse();
  for (std::size_t s = 0; s < count; ++s) {
    // deta * dxi^{-1} = (dxi^{-T} deta^T)^T
    Eigen::PartialPivLU<Mat> lu(traj.dxi[s].transpose());
    det[s] = lu.determinant();
    const Mat sens = lu.solve(traj.deta[s].transpose()).transpose();
    double tr = 0.0;
    for (int i = 0; i < m; ++i) tr += (mass * block(sens, i, i, d)).trace();
    trace[s] = tr;
  }

  DeterminantReport rep;
  rep.min_determinant = det[0];
  double integral = 0.0;
  const double h = count > 1 ? traj.times[1] - traj.times[0] : 0.0;
  for (std::size_t s = 0; s < count; s += 2) {
    if (s > 0) integral += h / 3.0 * (trace[s - 2] + 4.0 * trace[s - 1] + trace[s]);
    const double jacobi = det[0] * std::exp(integral);
    rep.times.push_back(traj.times[s]);
    rep.direct.push_back(det[s]);
    rep.jacobi.push_back(jacobi);
    rep.max_relative_defect =
        std::max(rep.max_relative_defect, std::abs(det[s] - jacobi) / std::abs(jacobi));
  }
  for (std::size_t s = 0; s < count; ++s) {
    rep.min_determinant = std::min(rep.min_determinant, det[s]);
    if (det[s] <= 0.0)
      throw ConjugatePointError(traj.times[s],
                                fmt::format("det D_z xi vanished at s = {:.6g}", traj.times[s]));
  }
  return rep;
}

InversionResult invert_flow(const HamiltonianModel& model, const DataModel& data, const Vec& q,
                            double t, int steps, const Vec* warm_start) {
  const int d = model.dimension();
  particle_count(q, d);
  if (!q.allFinite()) throw InvalidInput("target configuration must be finite");
  if (steps <= 0) steps = default_steps(t);
  const double tol = 1e-8 * (1.0 + q.norm());
  constexpr int kMaxIterations = 60;

  InversionResult res;
  res.z = (warm_start && warm_start->size() == q.size()) ? *warm_start : q;
  if (t == 0.0) {
    res.z = q;
    res.trajectory = integrate_forward(model, data, q, 0.0, steps, true);
    return res;
  }

  auto evaluate = [&](const Vec& z, PhaseTrajectory& traj) -> double {
    try {
      traj = integrate_forward(model, data, z, t, steps, true);
    } catch (const BlowUpError&) {
      return std::numeric_limits<double>::infinity();
    }
    return (traj.final_xi() - q).norm();
  };

  PhaseTrajectory traj;
  double r = evaluate(res.z, traj);
  if (!std::isfinite(r)) {
    res.z = q;
    r = evaluate(res.z, traj);
  }
  // once the tolerance is met, keep polishing while Newton still gains
  bool converged = false;
  int polish = 0;
  for (int it = 0; it < kMaxIterations; ++it) {
    res.iterations = it;
    if (r <= tol) {
      converged = true;
      if (polish++ >= 3 || r <= 1e-15 * (1.0 + q.norm())) break;
    }
    const Vec residual = traj.final_xi() - q;
    const Vec step = traj.dxi.back().partialPivLu().solve(residual);
    bool improved = false;
    if (step.allFinite()) {
      double scale = 1.0;
      for (int half = 0; half < 30; ++half, scale *= 0.5) {
        PhaseTrajectory trial;
        const Vec z = res.z - scale * step;
        const double rt = evaluate(z, trial);
        if (rt < r) {
          res.z = z;
          r = rt;
          traj = std::move(trial);
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      if (converged) break;
      PhaseTrajectory trial;
      const Vec z = res.z - 0.5 * residual;
      const double rt = evaluate(z, trial);
      if (!std::isfinite(rt))
        throw InversionFailure(r, "flow inversion stalled: fixed-point step blew up");
      res.z = z;
      r = rt;
      traj = std::move(trial);
    }
  }
  if (!(r <= tol))
    throw InversionFailure(r, fmt::format("flow inversion did not converge (residual {:.3e})", r));
  res.residual = r;
  res.trajectory = std::move(traj);
  return res;
}

PhaseTrajectory solve_bvp(const HamiltonianModel& model, const DataModel& data, const Vec& q,
                          double t, int steps, const Vec* warm_start) {
  return invert_flow(model, data, q, t, steps, warm_start).trajectory;
}

double trajectory_action(const HamiltonianModel& model, const DataModel& data,
                         const PhaseTrajectory& traj) {
  const int m = traj.m, d = traj.d;
  double value = data.initial().restricted(traj.xi.front(), d);
  const std::size_t count = traj.times.size();
  if (count < 2) return value;
  if ((count - 1) % 2) throw InvalidInput("Simpson quadrature needs an even step count");
  auto integrand = [&](std::size_t s) {
    double lag = 0.0;
    for (int i = 0; i < m; ++i) {
      const Vec q = particle(traj.xi[s], i, d);
      const Vec v = model.dpH(q, static_cast<double>(m) * particle(traj.eta[s], i, d));
      lag += model.L(q, v);
    }
    lag /= m;
    if (!data.coupling().is_zero()) lag += data.coupling().restricted(traj.xi[s], d);
    return lag;
  };
  const double h = traj.times[1] - traj.times[0];
  double integral = 0.0;
  double prev = integrand(0);
  for (std::size_t s = 2; s < count; s += 2) {
    const double mid = integrand(s - 1), next = integrand(s);
    integral += h / 3.0 * (prev + 4.0 * mid + next);
    prev = next;
  }
  return value + integral;
}

// ---------------------------------------------------------------------------

std::string block_case_name(BlockCase c) {
  switch (c) {
    case BlockCase::Forced: return "1";
    case BlockCase::Paired: return "2";
    default: return "kernel";
  }
}

BlockCase block_case_from_name(const std::string& name) {
  if (name == "1") return BlockCase::Forced;
  if (name == "2") return BlockCase::Paired;
  if (name == "kernel") return BlockCase::Kernel;
  throw ConfigError("unknown block case '" + name + "' (expected 1, 2 or kernel)");
}

nlohmann::json BlockRecord::to_json() const {
  nlohmann::json g = nlohmann::json::array();
  for (const auto& grp : groups) g.push_back({{"class", grp.name}, {"max_abs", grp.max_abs}});
  return {{"m", spec.m}, {"case", block_case_name(spec.which)}, {"t", spec.t}, {"groups", g}};
}

namespace {

struct BlockProblem {
  Mat b;      // 2m x 2m
  Mat force;  // 2m x k (constant forcing)
  Mat init;   // 2m x k
};

BlockProblem assemble(const BlockSystemSpec& s) {
  const int m = s.m;
  const double md = m;
  BlockProblem p;
  Mat b3 = Mat::Constant(m, m, 1.0 / (md * md));
  b3.diagonal().setConstant(1.0 / md);
  p.b = Mat::Zero(2 * m, 2 * m);
  p.b.topLeftCorner(m, m).setIdentity();
  p.b.topRightCorner(m, m) = md * Mat::Identity(m, m);
  p.b.bottomLeftCorner(m, m) = b3;
  p.b.bottomRightCorner(m, m).setIdentity();
  if (s.which == BlockCase::Kernel) {
    p.force = Mat::Zero(2 * m, m);
    p.init.resize(2 * m, m);
    p.init << Mat::Identity(m, m), b3;
    return p;
  }
  Vec a1(m), a2(m);
  if (s.which == BlockCase::Forced) {
    a1.setConstant(1.0 / md);
    a2.setConstant(1.0 / (md * md));
    a1(s.i0) = 1.0;
    a2(s.i0) = 1.0 / md;
  } else {
    a1.setConstant(1.0 / (md * md));
    a2.setConstant(1.0 / (md * md * md));
    for (int idx : {s.j, s.k}) {
      a1(idx) = 1.0 / md;
      a2(idx) = 1.0 / (md * md);
    }
  }
  p.force.resize(2 * m, 1);
  p.force << a1, a2;
  p.init = Mat::Zero(2 * m, 1);
  p.init.bottomRows(m) = a2;  // Y0 = A2 in both forced cases
  return p;
}

Mat solve_expm(const BlockProblem& p, double t) {
  const auto n = p.b.rows();
  const auto k = p.init.cols();
  // [Z; I]' = [[B, F], [0, 0]] [Z; I] turns the constant forcing into a
  // homogeneous system
  Mat aug = Mat::Zero(n + k, n + k);
  aug.topLeftCorner(n, n) = p.b;
  aug.topRightCorner(n, k) = p.force;
  Mat e = (t * aug).exp();
  Mat start(n + k, k);
  start << p.init, Mat::Identity(k, k);
  return (e * start).topRows(n);
}

Mat solve_rk4(const BlockProblem& p, double t, int steps) {
  const auto n = p.b.rows();
  const auto k = p.init.cols();
  Vec y = Eigen::Map<const Vec>(p.init.data(), n * k);
  auto rhs = [&](const Vec& x, Vec& dx, double) {
    Eigen::Map<const Mat> z(x.data(), n, k);
    dx.resize(x.size());
    Eigen::Map<Mat>(dx.data(), n, k) = p.b * z + p.force;
  };
  Stepper stepper;
  const double h = t / steps;
  for (int s = 0; s < steps; ++s) stepper.do_step(rhs, y, s * h, h);
  return Eigen::Map<const Mat>(y.data(), n, k);
}

std::vector<BlockGroup> classify(const BlockSystemSpec& s, const Mat& z) {
  const int m = s.m;
  auto absmax = [](double a, double v) { return std::max(a, std::abs(v)); };
  if (s.which == BlockCase::Kernel) {
    double xd = 0, xo = 0, yd = 0, yo = 0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        if (i == j) {
          xd = absmax(xd, z(i, j));
          yd = absmax(yd, z(m + i, j));
        } else {
          xo = absmax(xo, z(i, j));
          yo = absmax(yo, z(m + i, j));
        }
      }
    return {{"X_diag", xd, 0.0}, {"X_off", xo, -1.0}, {"Y_diag", yd, -1.0}, {"Y_off", yo, -2.0}};
  }
  auto special = [&](int i) {
    return s.which == BlockCase::Forced ? i == s.i0 : (i == s.j || i == s.k);
  };
  double xs = 0, xo = 0, ys = 0, yo = 0;
  for (int i = 0; i < m; ++i) {
    if (special(i)) {
      xs = absmax(xs, z(i, 0));
      ys = absmax(ys, z(m + i, 0));
    } else {
      xo = absmax(xo, z(i, 0));
      yo = absmax(yo, z(m + i, 0));
    }
  }
  if (s.which == BlockCase::Forced)
    return {{"X_i0", xs, 0.0}, {"X_other", xo, -1.0}, {"Y_i0", ys, -1.0}, {"Y_other", yo, -2.0}};
  return {{"X_jk", xs, -1.0}, {"X_other", xo, -2.0}, {"Y_jk", ys, -2.0}, {"Y_other", yo, -3.0}};
}

}  // namespace

BlockRecord block_ode_scaling(const BlockSystemSpec& spec, int rk4_steps) {
  if (spec.m < 2) throw InvalidInput("block system needs m >= 2");
  if (!(spec.t >= 0.0)) throw InvalidInput("time horizon must be nonnegative");
  auto in_range = [&](int i) { return i >= 0 && i < spec.m; };
  if (spec.which == BlockCase::Forced && !in_range(spec.i0))
    throw InvalidInput("index i0 out of range");
  if (spec.which == BlockCase::Paired && (!in_range(spec.j) || !in_range(spec.k) || spec.j == spec.k))
    throw InvalidInput("indices j, k must be distinct and in range");
  const BlockProblem p = assemble(spec);
  const Mat ze = solve_expm(p, spec.t);
  const Mat zr = solve_rk4(p, spec.t, rk4_steps);
  BlockRecord rec;
  rec.spec = spec;
  rec.groups = classify(spec, ze);
  const auto alt = classify(spec, zr);
  for (std::size_t g = 0; g < alt.size(); ++g) {
    const double scale = std::max(rec.groups[g].max_abs, 1e-300);
    rec.method_defect =
        std::max(rec.method_defect, std::abs(rec.groups[g].max_abs - alt[g].max_abs) / scale);
  }
  return rec;
}

}  // namespace mfglab
