#include "mfglab/value.hpp"

#include "mfglab/errors.hpp"
#include "mfglab/random.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfglab {

std::string value_method_name(ValueMethod method) {
  return method == ValueMethod::Characteristics ? "characteristics" : "direct";
}

namespace {

void require_config(const Vec& q, int d) {
  if (q.size() == 0 || q.size() % d != 0)
    throw InvalidInput("configuration size must be a positive multiple of the dimension");
  if (!q.allFinite()) throw InvalidInput("configuration must be finite");
}

ValueSample initial_sample(const DataModel& data, const Vec& q, int d, ValueMethod method) {
  ValueSample s;
  s.t = 0.0;
  s.q = q;
  s.value = data.initial().restricted(q, d);
  s.gradient = data.initial().restricted_gradient(q, d);
  s.method = method;
  s.z = q;
  return s;
}

// Running potential V(x) = (1/m) sum g(x_i) + F^m(x), so L^m + F^m equals
// the kinetic part plus V.
struct RunningPotential {
  const HamiltonianModel& model;
  const DataModel& data;
  int m, d;

  double value(const Vec& x) const {
    double s = 0.0;
    if (!model.potential_is_zero())
      for (int i = 0; i < m; ++i) s += model.potential().value(particle(x, i, d));
    s /= m;
    if (!data.coupling().is_zero()) s += data.coupling().restricted(x, d);
    return s;
  }
  Vec gradient(const Vec& x) const {
    Vec g = Vec::Zero(x.size());
    if (!model.potential_is_zero())
      for (int i = 0; i < m; ++i) particle(g, i, d) = model.potential().gradient(particle(x, i, d)) / m;
    if (!data.coupling().is_zero()) g += data.coupling().restricted_gradient(x, d);
    return g;
  }
  Mat hessian(const Vec& x) const {
    Mat h = Mat::Zero(x.size(), x.size());
    if (!model.potential_is_zero())
      for (int i = 0; i < m; ++i) block(h, i, i, d) = model.potential().hessian(particle(x, i, d)) / m;
    if (!data.coupling().is_zero()) h += data.coupling().restricted_hessian(x, d);
    return h;
  }
};

// Discrete action over nodes gamma_0..gamma_N with gamma_N = q fixed:
// U0(gamma_0) + sum_k (1/(2mh)) |gamma_{k+1}-gamma_k|_A^2 + h sum_k w_k V(gamma_k)
// with trapezoid weights w.
class DiscreteAction {
 public:
  DiscreteAction(const HamiltonianModel& model, const DataModel& data, double t, const Vec& q,
                 int nodes)
      : model_(model), data_(data), pot_{model, data, static_cast<int>(q.size()) / model.dimension(),
                                         model.dimension()},
        q_(q), n_(static_cast<int>(q.size())), nodes_(nodes), h_(t / nodes) {
    const int m = pot_.m;
    kin_ = Mat::Zero(n_, n_);
    for (int i = 0; i < m; ++i) block(kin_, i, i, pot_.d) = model.kinetic() / (m * h_);
  }

  int unknowns() const { return n_ * nodes_; }

  Vec node(const Vec& x, int k) const { return k == nodes_ ? q_ : Vec(x.segment(k * n_, n_)); }

  double weight(int k) const { return (k == 0 || k == nodes_) ? 0.5 : 1.0; }

  double value(const Vec& x) const {
    double s = data_.initial().restricted(node(x, 0), pot_.d);
    for (int k = 0; k < nodes_; ++k) {
      const Vec dx = node(x, k + 1) - node(x, k);
      s += 0.5 * dx.dot(kin_ * dx);
    }
    for (int k = 0; k <= nodes_; ++k) s += h_ * weight(k) * pot_.value(node(x, k));
    return s;
  }

  Vec gradient(const Vec& x) const {
    Vec g = Vec::Zero(unknowns());
    g.segment(0, n_) += data_.initial().restricted_gradient(node(x, 0), pot_.d);
    for (int k = 0; k < nodes_; ++k) {
      const Vec f = kin_ * (node(x, k + 1) - node(x, k));
      g.segment(k * n_, n_) -= f;
      if (k + 1 < nodes_) g.segment((k + 1) * n_, n_) += f;
    }
    for (int k = 0; k < nodes_; ++k) g.segment(k * n_, n_) += h_ * weight(k) * pot_.gradient(node(x, k));
    return g;
  }

  // derivative of the action in the fixed endpoint q, i.e. D_q of the value
  Vec endpoint_gradient(const Vec& x) const {
    return kin_ * (q_ - node(x, nodes_ - 1)) + h_ * 0.5 * pot_.gradient(q_);
  }

  Eigen::SparseMatrix<double> hessian(const Vec& x) const {
    std::vector<Eigen::Triplet<double>> trips;
    auto add_block = [&](int bi, int bj, const Mat& b) {
      for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c)
          if (b(r, c) != 0.0) trips.emplace_back(bi * n_ + r, bj * n_ + c, b(r, c));
    };
    add_block(0, 0, data_.initial().restricted_hessian(node(x, 0), pot_.d));
    for (int k = 0; k < nodes_; ++k) {
      add_block(k, k, kin_);
      if (k + 1 < nodes_) {
        add_block(k + 1, k + 1, kin_);
        add_block(k, k + 1, -kin_);
        add_block(k + 1, k, -kin_);
      }
      add_block(k, k, h_ * weight(k) * pot_.hessian(node(x, k)));
    }
    Eigen::SparseMatrix<double> hs(unknowns(), unknowns());
    hs.setFromTriplets(trips.begin(), trips.end());
    return hs;
  }

 private:
  const HamiltonianModel& model_;
  const DataModel& data_;
  RunningPotential pot_;
  Vec q_;
  Mat kin_;
  int n_, nodes_;
  double h_;
};

}  // namespace

ValueSample direct_value(const HamiltonianModel& model, const DataModel& data, double t,
                         const Vec& q, int nodes) {
  const int d = model.dimension();
  require_config(q, d);
  if (!(t >= 0.0)) throw InvalidInput("time must be nonnegative");
  if (t == 0.0) return initial_sample(data, q, d, ValueMethod::Direct);
  if (nodes < 2) throw InvalidInput("direct minimisation needs at least two nodes");
  DiscreteAction action(model, data, t, q, nodes);
  Vec x(action.unknowns());
  for (int k = 0; k < nodes; ++k) x.segment(k * q.size(), q.size()) = q;

  double f = action.value(x);
  constexpr int kMaxIterations = 200;
  bool done = false;
  for (int it = 0; it < kMaxIterations && !done; ++it) {
    const Vec g = action.gradient(x);
    Eigen::SparseMatrix<double> hs = action.hessian(x);
    Vec step;
    double shift = 0.0;
    // Levenberg shift until the factorisation is positive definite
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::SparseMatrix<double> shifted = hs;
      if (shift > 0.0)
        for (int r = 0; r < shifted.rows(); ++r) shifted.coeffRef(r, r) += shift;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
      if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
        step = ldlt.solve(g);
        break;
      }
      shift = shift == 0.0 ? 1e-8 : shift * 10.0;
    }
    if (step.size() == 0) throw OptimizationFailure("direct minimisation: Hessian not factorable");
    const double decrement = g.dot(step);
    if (decrement < 1e-12 * (1.0 + std::abs(f)) && shift == 0.0) {
      // inside the quadratic convergence region the action can no longer
      // resolve progress; finish with full steps
      x -= step;
      f = action.value(x);
      if (decrement < 1e-24 * (1.0 + std::abs(f))) {
        done = true;
        break;
      }
      continue;
    }
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const Vec trial = x - alpha * step;
      const double ft = action.value(trial);
      if (ft <= f - 1e-4 * alpha * decrement) {
        x = trial;
        f = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // rounding floor: the decrement is as small as the action can resolve
      if (decrement < 1e-18 * (1.0 + std::abs(f))) {
        done = true;
        break;
      }
      throw OptimizationFailure("direct minimisation: line search failed");
    }
  }
  if (!done) {
    if (action.gradient(x).lpNorm<Eigen::Infinity>() > 1e-7)
      throw OptimizationFailure("direct minimisation did not converge");
  }
  ValueSample s;
  s.t = t;
  s.q = q;
  s.value = f;
  s.gradient = action.endpoint_gradient(x);
  s.method = ValueMethod::Direct;
  return s;
}

ValueSample value(const HamiltonianModel& model, const DataModel& data, double t, const Vec& q,
                  ValueMethod method, int steps, const Vec* warm_start) {
  const int d = model.dimension();
  require_config(q, d);
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("time must be nonnegative");
  if (t == 0.0) return initial_sample(data, q, d, method);
  if (method == ValueMethod::Direct) {
    // the discrete minimum has an even error expansion in the node spacing
    const ValueSample coarse = direct_value(model, data, t, q, 64);
    ValueSample fine = direct_value(model, data, t, q, 128);
    fine.value = (4.0 * fine.value - coarse.value) / 3.0;
    fine.gradient = 2.0 * fine.gradient - coarse.gradient;
    return fine;
  }
  const InversionResult inv = invert_flow(model, data, q, t, steps, warm_start);
  ValueSample s;
  s.t = t;
  s.q = q;
  s.value = trajectory_action(model, data, inv.trajectory);
  s.gradient = inv.trajectory.final_eta();
  s.method = method;
  s.z = inv.z;
  return s;
}

Vec wasserstein_gradient(const HamiltonianModel& model, const DataModel& data, double t,
                         const EmpiricalMeasure& mu, int steps) {
  if (mu.dimension() != model.dimension()) throw InvalidInput("measure dimension mismatch");
  const PhaseTrajectory traj = solve_bvp(model, data, mu.config(), t, steps);
  return static_cast<double>(mu.m()) * traj.final_eta();
}

Vec wasserstein_gradient_fd(const HamiltonianModel& model, const DataModel& data, double t,
                            const EmpiricalMeasure& mu, int steps) {
  const int d = mu.dimension();
  const Vec& q = mu.config();
  const ValueSample base = value(model, data, t, q, ValueMethod::Characteristics, steps);
  Vec g(q.size());
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    const double h = 1e-4 * (1.0 + particle(q, static_cast<int>(c) / d, d).norm());
    Vec qp = q, qm = q;
    qp(c) += h;
    qm(c) -= h;
    const double vp = value(model, data, t, qp, ValueMethod::Characteristics, steps, &base.z).value;
    const double vm = value(model, data, t, qm, ValueMethod::Characteristics, steps, &base.z).value;
    g(c) = (vp - vm) / (2.0 * h);
  }
  return static_cast<double>(mu.m()) * g;
}

namespace {

struct BvpPoint {
  Vec z;
  Vec eta;
  Mat dxi, deta;
};

BvpPoint bvp_point(const HamiltonianModel& model, const DataModel& data, const Vec& q, double t,
                   int steps, const Vec* warm) {
  InversionResult inv = invert_flow(model, data, q, t, steps, warm);
  return {inv.z, inv.trajectory.final_eta(), inv.trajectory.dxi.back(), inv.trajectory.deta.back()};
}

Mat variational_hessian(const BvpPoint& p) {
  const Mat h = p.dxi.transpose().partialPivLu().solve(p.deta.transpose()).transpose();
  return h;
}

// warm start for a perturbed target: z + (D_z xi)^{-1} dq
Vec predicted_start(const BvpPoint& base, const Vec& dq) {
  return base.z + base.dxi.partialPivLu().solve(dq);
}

HessianKernel assemble_kernel(const Mat& raw, int m, int d) {
  HessianKernel k;
  k.m = m;
  k.d = d;
  k.hessian = 0.5 * (raw + raw.transpose());
  k.lambda1 = Mat::Zero(raw.rows(), raw.cols());
  const double md = m;
  for (int i = 0; i < m; ++i) {
    const Mat b = block(raw, i, i, d);
    k.lambda0_asymmetry = std::max(k.lambda0_asymmetry, md * (b - b.transpose()).cwiseAbs().maxCoeff());
    k.lambda0.push_back(md * block(k.hessian, i, i, d));
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      block(k.lambda1, i, j, d) = md * md * block(k.hessian, i, j, d);
      const Mat bij = block(raw, i, j, d), bji = block(raw, j, i, d);
      k.lambda1_asymmetry =
          std::max(k.lambda1_asymmetry, md * md * (bij - bji.transpose()).cwiseAbs().maxCoeff());
    }
  }
  return k;
}

}  // namespace

HessianKernel hessian_kernel(const HamiltonianModel& model, const DataModel& data, double t,
                             const EmpiricalMeasure& mu, HessianMethod method, int steps) {
  const int d = mu.dimension();
  if (d != model.dimension()) throw InvalidInput("measure dimension mismatch");
  if (!(t >= 0.0)) throw InvalidInput("time must be nonnegative");
  const Vec& q = mu.config();
  const BvpPoint base = bvp_point(model, data, q, t, steps, nullptr);
  if (method == HessianMethod::Variational)
    return assemble_kernel(variational_hessian(base), mu.m(), d);
  Mat raw(q.size(), q.size());
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    const double h = 1e-4 * (1.0 + particle(q, static_cast<int>(c) / d, d).norm());
    Vec dq = Vec::Zero(q.size());
    dq(c) = h;
    const Vec wp = predicted_start(base, dq), wm = predicted_start(base, -dq);
    const BvpPoint p = bvp_point(model, data, q + dq, t, steps, &wp);
    const BvpPoint n = bvp_point(model, data, q - dq, t, steps, &wm);
    raw.col(c) = (p.eta - n.eta) / (2.0 * h);
  }
  return assemble_kernel(raw, mu.m(), d);
}

double hj_residual(const HamiltonianModel& model, const DataModel& data, double t, const Vec& q,
                   int steps) {
  const int d = model.dimension();
  require_config(q, d);
  if (!(t > 0.0)) throw InvalidInput("HJ residual needs t > 0");
  if (steps <= 0) steps = default_steps(t);
  const double dt = 1e-3 * t;
  const ValueSample mid = value(model, data, t, q, ValueMethod::Characteristics, steps);
  const double up = value(model, data, t + dt, q, ValueMethod::Characteristics, steps, &mid.z).value;
  const double dn = value(model, data, t - dt, q, ValueMethod::Characteristics, steps, &mid.z).value;
  const double dudt = (up - dn) / (2.0 * dt);
  const int m = static_cast<int>(q.size()) / d;
  double hm = 0.0;
  for (int i = 0; i < m; ++i)
    hm += model.H(particle(q, i, d), static_cast<double>(m) * particle(mid.gradient, i, d));
  hm /= m;
  const double fm = data.coupling().is_zero() ? 0.0 : data.coupling().restricted(q, d);
  return std::abs(dudt + hm - fm);
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("slope fit needs matching samples");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

bool ScalingReport::passed() const {
  return std::all_of(classes.begin(), classes.end(), [](const ScalingClass& c) { return c.pass; });
}

std::string ScalingReport::to_csv() const {
  std::string out = "m,class,max_abs,target_slope,fitted_slope,pass\r\n";
  for (const auto& c : classes)
    for (std::size_t k = 0; k < ms.size(); ++k)
      out += fmt::format("{},{},{:.17g},{:.17g},{:.17g},{}\r\n", ms[k], c.name, c.max_abs[k],
                         c.target, c.fitted, c.pass ? 1 : 0);
  return out;
}

ScalingReport scaling_study(const HamiltonianModel& model, const DataModel& data,
                            const ScalingOptions& opt) {
  if (opt.ms.size() < 3) throw InvalidInput("scaling study needs at least three values of m");
  if (opt.seeds < 1) throw InvalidInput("scaling study needs at least one seed");
  if (!(opt.t > 0.0)) throw InvalidInput("scaling study needs t > 0");
  const int d = model.dimension();
  std::vector<int> ms = opt.ms;
  std::sort(ms.begin(), ms.end());
  if (ms.front() < 2) throw InvalidInput("scaling study needs m >= 2");
  if (ms.back() * d > 256) throw InvalidInput("m d must not exceed 256");
  if (opt.third && ms.front() < 3) throw InvalidInput("third-derivative classes need m >= 3");
  const int steps = opt.steps > 0 ? opt.steps : default_steps(opt.t);
  const double dt = 1e-3 * opt.t;

  ScalingReport rep;
  rep.ms = ms;
  enum { Diag, Off, TimeGrad, T3Diag, T3Pair, T3Distinct };
  std::vector<ScalingClass> cls = {{"hessian_diag", -1.0, {}, 0, false},
                                   {"hessian_off", -2.0, {}, 0, false}};
  if (opt.time_derivative) cls.push_back({"dt_gradient_energy", 0.0, {}, 0, false});
  if (opt.third) {
    cls.push_back({"third_iii", -1.0, {}, 0, false});
    cls.push_back({"third_iij", -2.0, {}, 0, false});
    cls.push_back({"third_ijk", -2.0, {}, 0, false});
  }
  for (auto& c : cls) c.max_abs.assign(ms.size(), 0.0);
  auto slot = [&](int kind) -> std::vector<double>& {
    int idx = kind;
    if (kind >= T3Diag && !opt.time_derivative) --idx;
    return cls[idx].max_abs;
  };

  for (int s = 0; s < opt.seeds; ++s) {
    Rng rng(opt.seed * 1000003ULL + static_cast<std::uint64_t>(s));
    const Vec cloud = uniform_ball_cloud(rng, ms.back(), d, opt.radius);
    for (std::size_t k = 0; k < ms.size(); ++k) {
      const int m = ms[k];
      const Vec q = cloud.head(m * d);
      const BvpPoint base = bvp_point(model, data, q, opt.t, steps, nullptr);
      const Mat hess = variational_hessian(base);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const double v = block(hess, i, j, d).cwiseAbs().maxCoeff();
          auto& target = i == j ? slot(Diag)[k] : slot(Off)[k];
          target = std::max(target, v);
        }
      if (opt.time_derivative) {
        const Vec gp = invert_flow(model, data, q, opt.t + dt, steps, &base.z).trajectory.final_eta();
        const Vec gm = invert_flow(model, data, q, opt.t - dt, steps, &base.z).trajectory.final_eta();
        const Vec dg = (gp - gm) / (2.0 * dt);
        double energy = 0.0;
        for (int i = 0; i < m; ++i) energy += m * particle(dg, i, d).squaredNorm();
        slot(TimeGrad)[k] = std::max(slot(TimeGrad)[k], energy);
      }
      if (opt.third) {
        const int n = m * d;
        double t_iii = 0.0, t_iij = 0.0, t_ijk = 0.0;
        for (int c = 0; c < n; ++c) {
          const int pc = c / d;
          const double h = 1e-3 * (1.0 + particle(q, pc, d).norm());
          Vec dq = Vec::Zero(n);
          dq(c) = h;
          const Vec wp = predicted_start(base, dq), wm = predicted_start(base, -dq);
          const Mat hp = variational_hessian(bvp_point(model, data, q + dq, opt.t, steps, &wp));
          const Mat hm = variational_hessian(bvp_point(model, data, q - dq, opt.t, steps, &wm));
          const Mat slice = (hp - hm) / (2.0 * h);
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
              const int pa = a / d, pb = b / d;
              const double v = std::abs(slice(a, b));
              if (pa == pb && pb == pc)
                t_iii = std::max(t_iii, v);
              else if (pa == pb || pb == pc || pa == pc)
                t_iij = std::max(t_iij, v);
              else
                t_ijk = std::max(t_ijk, v);
            }
        }
        slot(T3Diag)[k] = std::max(slot(T3Diag)[k], t_iii);
        slot(T3Pair)[k] = std::max(slot(T3Pair)[k], t_iij);
        slot(T3Distinct)[k] = std::max(slot(T3Distinct)[k], t_ijk);
      }
    }
  }
  std::vector<double> mx(ms.begin(), ms.end());
  for (auto& c : cls) {
    const bool all_zero =
        std::all_of(c.max_abs.begin(), c.max_abs.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
      // identically vanishing class: consistent with any decay rate
      c.fitted = -std::numeric_limits<double>::infinity();
      c.pass = true;
      continue;
    }
    c.fitted = fit_loglog_slope(mx, c.max_abs);
    c.pass = c.target == 0.0 ? c.fitted <= opt.slope_tolerance
                             : std::abs(c.fitted - c.target) <= opt.slope_tolerance;
  }
  rep.classes = std::move(cls);
  return rep;
}

ConvexityEvolution convexity_evolution(const HamiltonianModel& model, const DataModel& data,
                                       const std::vector<double>& times,
                                       const EmpiricalMeasure& mu, double tol) {
  ConvexityEvolution ev;
  ev.worst = std::numeric_limits<double>::infinity();
  for (double t : times) {
    const HessianKernel k = hessian_kernel(model, data, t, mu, HessianMethod::FiniteDifference);
    Eigen::SelfAdjointEigenSolver<Mat> es(k.hessian, Eigen::EigenvaluesOnly);
    const double e = es.eigenvalues().minCoeff();
    ev.times.push_back(t);
    ev.min_eigenvalue.push_back(e);
    ev.worst = std::min(ev.worst, e);
  }
  ev.passed = !times.empty() && ev.worst >= -tol;
  return ev;
}

}  // namespace mfglab
