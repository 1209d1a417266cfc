#include "mfglab/experiment.hpp"

#include "mfglab/data.hpp"
#include "mfglab/errors.hpp"
#include "mfglab/flow.hpp"
#include "mfglab/master.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/model.hpp"
#include "mfglab/random.hpp"
#include "mfglab/value.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace mfglab {

namespace {

using nlohmann::json;

// Kind-specific parameters with range checks; unknown keys are rejected.
class Params {
 public:
  explicit Params(const json& j) : j_(j) {
    if (!j_.is_object()) throw ConfigError("params must be an object");
  }

  double number(const std::string& key, double fallback, double lo, double hi) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    if (!j_.at(key).is_number()) throw ConfigError("params." + key + " must be a number");
    const double v = j_.at(key).get<double>();
    if (!(v >= lo && v <= hi))
      throw ConfigError(fmt::format("params.{} must lie in [{}, {}]", key, lo, hi));
    return v;
  }

  int integer(const std::string& key, int fallback, int lo, int hi) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    if (!j_.at(key).is_number_integer()) throw ConfigError("params." + key + " must be an integer");
    const long long v = j_.at(key).get<long long>();
    if (v < lo || v > hi) throw ConfigError(fmt::format("params.{} must lie in [{}, {}]", key, lo, hi));
    return static_cast<int>(v);
  }

  bool flag(const std::string& key, bool fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError("params." + key + " must be a boolean");
    return j_.at(key).get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback,
                   const std::vector<std::string>& allowed) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    if (!j_.at(key).is_string()) throw ConfigError("params." + key + " must be a string");
    const std::string v = j_.at(key).get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
      throw ConfigError("params." + key + " has unsupported value '" + v + "'");
    return v;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback, double lo,
                              double hi) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& a = j_.at(key);
    if (!a.is_array() || a.empty()) throw ConfigError("params." + key + " must be a non-empty array");
    std::vector<double> out;
    for (const auto& v : a) {
      if (!v.is_number()) throw ConfigError("params." + key + " must contain numbers");
      const double x = v.get<double>();
      if (!(x >= lo && x <= hi))
        throw ConfigError(fmt::format("params.{} entries must lie in [{}, {}]", key, lo, hi));
      out.push_back(x);
    }
    return out;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> fallback, int lo, int hi) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    const json& a = j_.at(key);
    if (!a.is_array() || a.empty()) throw ConfigError("params." + key + " must be a non-empty array");
    std::vector<int> out;
    for (const auto& v : a) {
      if (!v.is_number_integer()) throw ConfigError("params." + key + " must contain integers");
      const long long x = v.get<long long>();
      if (x < lo || x > hi)
        throw ConfigError(fmt::format("params.{} entries must lie in [{}, {}]", key, lo, hi));
      out.push_back(static_cast<int>(x));
    }
    return out;
  }

  const json* raw(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError("unknown parameter params." + k);
  }

 private:
  const json& j_;
  std::set<std::string> used_;
};

std::string num(double v) { return fmt::format("{:.17g}", v); }

struct Context {
  json config;
  std::uint64_t seed = 0;
  bool checks_enabled = true;
  std::vector<CheckResult> checks;
  std::map<std::string, std::string> artifacts;
  json summary = json::object();

  // passes iff value <= threshold
  void at_most(const std::string& name, double value, double threshold) {
    checks.push_back({name, std::isfinite(value) && value <= threshold, value, threshold});
  }
  // passes iff value >= threshold
  void at_least(const std::string& name, double value, double threshold) {
    checks.push_back({name, std::isfinite(value) && value >= threshold, value, threshold});
  }
  // passes iff value > 0
  void positive(const std::string& name, double value) {
    checks.push_back({name, std::isfinite(value) && value > 0.0, value, 0.0});
  }
  void holds(const std::string& name, bool ok) {
    checks.push_back({name, ok, ok ? 1.0 : 0.0, 1.0});
  }
};

HamiltonianModel model_of(const json& cfg) {
  return HamiltonianModel::from_json(cfg.contains("model") ? cfg.at("model")
                                                            : json{{"dimension", 1}});
}

DataModel data_of(const json& cfg, int d) {
  return DataModel::from_json(cfg.contains("data") ? cfg.at("data") : json::object(), d);
}

bool is_quadratic(const ScalarFunction& f, double* lambda) {
  const json j = f.to_json();
  if (j.at("name") != "quadratic") return false;
  *lambda = j.at("lambda").get<double>();
  return true;
}

// ---------------------------------------------------------------- audit

void run_audit(Context& ctx, Params& p) {
  const HamiltonianModel model = model_of(ctx.config);
  AuditRegion region;
  region.radius = p.number("radius", 3.0, 1e-6, 1e6);
  region.samples = p.integer("samples", 100, 1, 100000);
  region.seed = ctx.seed;
  const int instances = p.integer("transport_instances", 200, 0, 100000);
  const int m_max = p.integer("transport_m_max", 8, 1, 8);
  const int d_max = p.integer("transport_d_max", 3, 1, 3);
  p.finish();

  const AuditReport leg = legendre_check(model, region);
  const AuditReport der = derivative_check(model, region);
  ctx.at_most("legendre_defect", leg.worst, leg.tolerance);
  ctx.at_most("derivative_relative_error", der.worst, der.tolerance);
  ctx.artifacts["audit.json"] =
      json{{"legendre", {{"passed", leg.passed}, {"worst", leg.worst}, {"details", leg.details}}},
           {"derivatives", {{"passed", der.passed}, {"worst", der.worst}, {"details", der.details}}}}
          .dump(2) + "\n";

  if (instances == 0) return;
  Rng rng(ctx.seed + 1);
  std::string csv = "instance,m,d,w2_assignment,w2_exhaustive,w2_sorting\r\n";
  int mismatches = 0;
  double geodesic = 0.0, triangle = 0.0, symmetry = 0.0;
  for (int k = 0; k < instances; ++k) {
    const int m = 1 + static_cast<int>(rng() % m_max);
    const int d = 1 + static_cast<int>(rng() % d_max);
    const EmpiricalMeasure mu(uniform_ball_cloud(rng, m, d, 2.0), d);
    const EmpiricalMeasure nu(uniform_ball_cloud(rng, m, d, 2.0), d);
    const EmpiricalMeasure rho(uniform_ball_cloud(rng, m, d, 2.0), d);
    const Transport a = w2_distance(mu, nu, TransportSolver::Assignment);
    const Transport b = w2_distance(mu, nu, TransportSolver::Exhaustive);
    std::string sorted = "";
    if (d == 1) {
      const Transport s = w2_distance(mu, nu, TransportSolver::Sorting);
      if (s.distance != b.distance) ++mismatches;
      sorted = num(s.distance);
    }
    if (a.distance != b.distance) ++mismatches;
    csv += fmt::format("{},{},{},{},{},{}\r\n", k, m, d, num(a.distance), num(b.distance), sorted);
    for (double t : {0.25, 0.5, 0.75}) {
      const double w = w2_distance(mu, displacement_interpolate(mu, nu, t)).distance;
      geodesic = std::max(geodesic, std::abs(w - t * b.distance));
    }
    const double ac = w2_distance(mu, rho).distance, cb = w2_distance(rho, nu).distance;
    triangle = std::max(triangle, b.distance - ac - cb);
    symmetry = std::max(symmetry, std::abs(w2_distance(nu, mu).distance - b.distance));
  }
  ctx.artifacts["transport.csv"] = csv;
  ctx.at_most("transport_solver_mismatches", mismatches, 0.0);
  ctx.at_most("geodesic_speed_defect", geodesic, 1e-9);
  ctx.at_most("triangle_violation", triangle, 1e-9);
  ctx.at_most("symmetry_defect", symmetry, 1e-12);
}

// ---------------------------------------------------------------- flow

void run_flow(Context& ctx, Params& p) {
  const json& mcfg = ctx.config.contains("model") ? ctx.config.at("model") : json{{"dimension", 1}};
  const HamiltonianModel base = HamiltonianModel::from_json(mcfg);
  const int instances = p.integer("instances", 20, 1, 10000);
  const int m_max = p.integer("m_max", 8, 1, 64);
  const double t_max = p.number("t_max", 1.0, 1e-3, 2.0);
  const double radius = p.number("radius", 1.0, 1e-6, 100.0);
  const bool random_data = p.flag("random_data", true);
  const int steps = p.integer("steps", 0, 0, 1 << 20);
  p.finish();

  const int dim = base.dimension();
  const bool isotropic =
      (base.kinetic() - base.kinetic()(0, 0) * Mat::Identity(dim, dim)).cwiseAbs().maxCoeff() == 0.0;
  Rng rng(ctx.seed);
  std::string csv = "instance,m,d,t,roundtrip,min_det,jacobi_defect\r\n";
  double worst_round = 0.0, worst_jacobi = 0.0, min_det = std::numeric_limits<double>::infinity();
  bool conjugate = false;
  for (int k = 0; k < instances; ++k) {
    // a scalar kinetic matrix lets the dimension vary; otherwise it is fixed by the model
    const int d = isotropic ? 1 + static_cast<int>(rng() % base.dimension()) : base.dimension();
    const int m = 1 + static_cast<int>(rng() % m_max);
    const double t = uniform(rng, 0.05 * t_max, t_max);
    const HamiltonianModel model =
        isotropic ? HamiltonianModel(d, base.kinetic()(0, 0) * Mat::Identity(d, d), base.potential_ptr())
                  : base;
    DataModel data = [&] {
      if (!random_data) return data_of(ctx.config, d);
      const double lambda = uniform(rng, 1.0, 2.0);
      const double amp = uniform(rng, 0.0, 0.5 * lambda);
      return DataModel(quadratic_function(lambda), gaussian_function(amp));
    }();
    const Vec q = uniform_ball_cloud(rng, m, d, radius);
    const InversionResult inv = invert_flow(model, data, q, t, steps);
    const PhaseTrajectory fwd = integrate_forward(model, data, inv.z, t, steps);
    const double round = (fwd.final_xi() - q).norm();
    double defect = 0.0, det = 0.0;
    try {
      const DeterminantReport rep = jacobian_determinant(model, data, inv.z, t, steps);
      defect = rep.max_relative_defect;
      det = rep.min_determinant;
    } catch (const ConjugatePointError&) {
      conjugate = true;
      det = 0.0;
    }
    worst_round = std::max(worst_round, round);
    worst_jacobi = std::max(worst_jacobi, defect);
    min_det = std::min(min_det, det);
    csv += fmt::format("{},{},{},{},{},{},{}\r\n", k, m, d, num(t), num(round), num(det), num(defect));
    if (k == 0) ctx.artifacts["trajectory.csv"] = fwd.to_csv();
  }
  ctx.artifacts["flow.csv"] = csv;
  ctx.at_most("roundtrip_residual", worst_round, 1e-7);
  ctx.holds("determinant_positive", !conjugate && min_det > 0.0);
  ctx.at_most("jacobi_relative_defect", worst_jacobi, 1e-4);
}

// ---------------------------------------------------------------- value

void run_value(Context& ctx, Params& p) {
  const HamiltonianModel model = model_of(ctx.config);
  const int d = model.dimension();
  const DataModel data = data_of(ctx.config, d);
  const std::string study =
      p.text("study", "closed_form", {"closed_form", "hj_residual", "method_agreement"});
  const int samples = p.integer("samples", 20, 1, 10000);
  const int m_max = p.integer("m_max", study == "method_agreement" ? 4 : 8, 1, 64);
  const double t_min = p.number("t_min", 0.1, 1e-3, 2.0);
  const double t_max = p.number("t_max", 1.0, t_min, 2.0);
  const double radius = p.number("radius", 1.0, 1e-6, 100.0);
  const int steps = p.integer("steps", 0, 0, 1 << 20);
  p.finish();

  double lambda = 0.0;
  if (study == "closed_form") {
    const bool ok = is_quadratic(data.initial().phi(), &lambda) && data.initial().phi1().is_zero() &&
                    data.coupling().is_zero() && model.potential_is_zero() &&
                    (model.kinetic() - Mat::Identity(d, d)).norm() == 0.0;
    if (!ok)
      throw ConfigError("closed_form study needs phi quadratic, phi1 = f = g = 0 and identity kinetic");
  }
  Rng rng(ctx.seed);
  std::string csv = "t,m,value,method,grad_norm\r\n";
  double e_value = 0, e_grad = 0, e_l0 = 0, e_l1 = 0, e_hj = 0, e_agree = 0;
  for (int k = 0; k < samples; ++k) {
    const int m = 1 + static_cast<int>(rng() % m_max);
    const double t = uniform(rng, t_min, t_max);
    const Vec q = uniform_ball_cloud(rng, m, d, radius);
    const ValueSample vs = value(model, data, t, q, ValueMethod::Characteristics, steps);
    csv += fmt::format("{},{},{},{},{}\r\n", num(t), m, num(vs.value), "characteristics",
                       num(vs.gradient.norm()));
    if (study == "closed_form") {
      const double scale = lambda / (1.0 + lambda * t);
      e_value = std::max(e_value, std::abs(vs.value - 0.5 * scale * q.squaredNorm() / m));
      const EmpiricalMeasure mu(q, d);
      const Vec wg = wasserstein_gradient(model, data, t, mu, steps);
      e_grad = std::max(e_grad, (wg - scale * q).lpNorm<Eigen::Infinity>());
      const HessianKernel hk = hessian_kernel(model, data, t, mu, HessianMethod::FiniteDifference, steps);
      for (const Mat& l0 : hk.lambda0)
        e_l0 = std::max(e_l0, (l0 - scale * Mat::Identity(d, d)).cwiseAbs().maxCoeff());
      e_l1 = std::max(e_l1, hk.lambda1.cwiseAbs().maxCoeff());
    } else if (study == "hj_residual") {
      e_hj = std::max(e_hj, hj_residual(model, data, t, q, steps));
    } else {
      const ValueSample dv = value(model, data, t, q, ValueMethod::Direct);
      csv += fmt::format("{},{},{},{},{}\r\n", num(t), m, num(dv.value), "direct",
                         num(dv.gradient.norm()));
      e_agree = std::max(e_agree, std::abs(dv.value - vs.value));
    }
  }
  ctx.artifacts["value.csv"] = csv;
  if (study == "closed_form") {
    ctx.at_most("value_error", e_value, 1e-6);
    ctx.at_most("wasserstein_gradient_error", e_grad, 1e-6);
    ctx.at_most("lambda0_error", e_l0, 1e-4);
    ctx.at_most("lambda1_magnitude", e_l1, 1e-6);
  } else if (study == "hj_residual") {
    ctx.at_most("hj_residual", e_hj, 5e-4);
  } else {
    ctx.at_most("method_disagreement", e_agree, 1e-5);
  }
}

// ---------------------------------------------------------------- scaling

void run_scaling(Context& ctx, Params& p) {
  const HamiltonianModel model = model_of(ctx.config);
  const DataModel data = data_of(ctx.config, model.dimension());
  ScalingOptions opt;
  opt.t = p.number("t", 0.5, 1e-3, 2.0);
  opt.ms = p.integers("ms", {4, 8, 16, 32}, 2, 128);
  opt.radius = p.number("radius", 1.0, 1e-6, 100.0);
  opt.seeds = p.integer("seeds", 16, 1, 1000);
  opt.third = p.flag("third", false);
  opt.time_derivative = p.flag("time_derivative", true);
  opt.slope_tolerance = p.number("slope_tolerance", 0.35, 0.0, 10.0);
  opt.steps = p.integer("steps", 0, 0, 1 << 20);
  p.finish();
  if (opt.ms.size() < 3) throw ConfigError("params.ms needs at least three entries");
  if (opt.third && *std::max_element(opt.ms.begin(), opt.ms.end()) > 16)
    throw ConfigError("third-derivative classes are limited to m <= 16");
  opt.seed = ctx.seed;
  const ScalingReport rep = scaling_study(model, data, opt);
  ctx.artifacts["scaling.csv"] = rep.to_csv();
  for (const auto& c : rep.classes) {
    if (c.target == 0.0)
      ctx.at_most("slope_" + c.name, c.fitted, opt.slope_tolerance);
    else
      ctx.at_most("slope_deviation_" + c.name, std::abs(c.fitted - c.target), opt.slope_tolerance);
  }
}

// ---------------------------------------------------------------- master

void run_master(Context& ctx, Params& p) {
  const HamiltonianModel model = model_of(ctx.config);
  const int d = model.dimension();
  const DataModel data = data_of(ctx.config, d);
  const int instances = p.integer("instances", 10, 1, 1000);
  const int m = p.integer("m", 3, 1, 16);
  const double t = p.number("t", 0.5, 1e-3, 2.0);
  const double radius = p.number("radius", 1.0, 1e-6, 100.0);
  const double off = p.number("off_support", 3.0, 0.0, 100.0);
  const int steps = p.integer("steps", 0, 0, 1 << 20);
  p.finish();

  Rng rng(ctx.seed);
  MasterOptions opt;
  opt.steps = steps > 0 ? steps : default_steps(t);
  std::string csv = "t";
  for (int c = 0; c < d; ++c) csv += fmt::format(",q0_{}", c);
  csv += ",m,u,dq0u_norm,residual_scalar\r\n";
  double consistency = 0, scalar_on = 0, scalar_off = 0, vectorial = 0, restriction = 0;
  auto row = [&](const Vec& q0, const MasterGradient& g, double res) {
    csv += num(t);
    for (int c = 0; c < d; ++c) csv += "," + num(q0(c));
    csv += fmt::format(",{},{},{},{}\r\n", m, num(g.u), num(g.dq0u.norm()), num(res));
  };
  for (int k = 0; k < instances; ++k) {
    const EmpiricalMeasure mu(uniform_ball_cloud(rng, m, d, radius), d);
    const Vec wgrad = wasserstein_gradient(model, data, t, mu, opt.steps);
    for (int i = 0; i < m; ++i) {
      const Vec q0 = mu.point(i);
      const MasterGradient g = master_gradient(model, data, t, q0, mu, opt);
      consistency = std::max(consistency, (g.dq0u - particle(wgrad, i, d)).norm());
      const double res = scalar_master_residual(model, data, q0, mu, g, wgrad);
      scalar_on = std::max(scalar_on, res);
      vectorial = std::max(vectorial, vectorial_master_residual(model, data, t, mu, i, opt.steps));
      restriction = std::max(
          restriction, std::abs(g.u - restricted_particle_value(model, data, t, mu, i, opt.steps)));
      row(q0, g, res);
    }
    Vec dir = uniform_ball(rng, d, 1.0);
    if (dir.norm() < 1e-3) dir = Vec::Unit(d, 0);
    const Vec q0 = off * radius * dir.normalized();
    const MasterGradient g = master_gradient(model, data, t, q0, mu, opt);
    const double res = scalar_master_residual(model, data, q0, mu, g, wgrad);
    scalar_off = std::max(scalar_off, res);
    row(q0, g, res);
  }
  ctx.artifacts["master.csv"] = csv;
  ctx.at_most("dq0u_vs_wasserstein_gradient", consistency, 1e-4);
  ctx.at_most("scalar_residual_on_support", scalar_on, 5e-3);
  ctx.at_most("scalar_residual_off_support", scalar_off, 5e-3);
  ctx.at_most("vectorial_residual", vectorial, 5e-3);
  ctx.at_most("restriction_identity", restriction, 1e-4);
}

// ---------------------------------------------------------------- counterexample

void run_counterexample(Context& ctx, Params& p) {
  std::vector<std::pair<double, double>> points = {{2.0, 0.0}};
  if (const json* raw = p.raw("points")) {
    if (!raw->is_array() || raw->empty()) throw ConfigError("params.points must be a non-empty array");
    points.clear();
    for (const auto& pt : *raw) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
        throw ConfigError("params.points entries must be [t, q]");
      const double t = pt[0].get<double>();
      if (!(t > 0.0) || t > 100.0) throw ConfigError("counterexample needs 0 < t <= 100");
      points.emplace_back(t, pt[1].get<double>());
    }
  }
  p.finish();
  std::string csv = "t,q,value,n_minimizers,superdiff_lo,superdiff_hi\r\n";
  for (const auto& [t, q] : points) {
    const HopfLaxResult r = counterexample_hopf_lax(t, q);
    csv += fmt::format("{},{},{},{},{},{}\r\n", num(t), num(q), num(r.value), r.minimizers.size(),
                       num(r.superdiff_lo), num(r.superdiff_hi));
    const std::string tag = fmt::format("t={:g},q={:g}", t, q);
    if (q == 0.0 && t > 1.0) {
      const double y = std::sqrt(t * t - 1.0);
      ctx.at_most("value_error[" + tag + "]", std::abs(r.value - (-t / 2 - 1 / (2 * t))), 1e-6);
      ctx.holds("two_minimizers[" + tag + "]", r.minimizers.size() == 2);
      double dev = 0.0;
      if (r.minimizers.size() == 2)
        dev = std::max(std::abs(r.minimizers[0] + y), std::abs(r.minimizers[1] - y));
      else
        dev = std::numeric_limits<double>::infinity();
      ctx.at_most("minimizer_error[" + tag + "]", dev, 1e-6);
      const double gap = 2.0 * y / t;
      ctx.at_most("superdiff_gap_error[" + tag + "]",
                  std::abs((r.superdiff_hi - r.superdiff_lo) - gap), 1e-4);
      const double h = 1e-5;
      const double right = (counterexample_hopf_lax(t, h).value - r.value) / h;
      const double left = (r.value - counterexample_hopf_lax(t, -h).value) / h;
      ctx.at_most("one_sided_gap_error[" + tag + "]", std::abs((left - right) - gap), 1e-4);
    } else if (q == 0.0) {
      ctx.holds("unique_minimizer[" + tag + "]",
                r.minimizers.size() == 1 && std::abs(r.minimizers[0]) < 1e-12);
      ctx.at_most("value_error[" + tag + "]", std::abs(r.value + 1.0), 1e-12);
    } else {
      ctx.holds("unique_minimizer[" + tag + "]", r.minimizers.size() == 1);
      const double h = 1e-4;
      const double du =
          (counterexample_hopf_lax(t, q + h).value - counterexample_hopf_lax(t, q - h).value) / (2 * h);
      ctx.at_most("envelope_error[" + tag + "]",
                  std::abs(du - (q - r.minimizers.front()) / t), 1e-6);
    }
  }
  ctx.artifacts["counterexample.csv"] = csv;
}

// ---------------------------------------------------------------- convexity

struct ConvexitySettings {
  std::vector<double> times;
  std::vector<int> ms;
  int samples;
  double radius;
};

ConvexitySettings convexity_settings(Params& p) {
  ConvexitySettings s;
  s.times = p.numbers("times", {0.25, 0.5, 1.0}, 0.0, 2.0);
  s.ms = p.integers("ms", {2, 4, 8}, 1, 16);
  s.samples = p.integer("samples", 2, 1, 100);
  s.radius = p.number("radius", 1.5, 1e-6, 100.0);
  return s;
}

void convexity_checks(Context& ctx, const HamiltonianModel& model, const DataModel& data,
                      const ConvexitySettings& s, double kappa) {
  const int d = model.dimension();
  Rng rng(ctx.seed);
  std::string csv = "t,m,sample,min_eig,threshold,pass\r\n";
  double worst_t = std::numeric_limits<double>::infinity();
  double worst_0 = std::numeric_limits<double>::infinity();
  for (int m : s.ms) {
    for (int k = 0; k < s.samples; ++k) {
      const Vec q = uniform_ball_cloud(rng, m, d, s.radius);
      const EmpiricalMeasure mu(q, d);
      const auto u0 = [&](const Vec& x) { return data.initial().restricted(x, d); };
      const ConvexityReport r0 = discrete_convexity_check(u0, m, kappa, {q}, 1e-5);
      worst_0 = std::min(worst_0, r0.worst_eigenvalue - r0.threshold);
      csv += fmt::format("0,{},{},{},{},{}\r\n", m, k, num(r0.worst_eigenvalue), num(r0.threshold),
                         r0.passed ? 1 : 0);
      const ConvexityEvolution ev = convexity_evolution(model, data, s.times, mu, 1e-5);
      for (std::size_t j = 0; j < ev.times.size(); ++j) {
        const bool ok = ev.min_eigenvalue[j] >= -1e-5;
        csv += fmt::format("{},{},{},{},{},{}\r\n", num(ev.times[j]), m, k, num(ev.min_eigenvalue[j]),
                           num(-1e-5), ok ? 1 : 0);
        worst_t = std::min(worst_t, ev.min_eigenvalue[j]);
      }
    }
  }
  ctx.artifacts["convexity.csv"] = csv;
  ctx.at_least("initial_kappa_convexity_margin", worst_0, 0.0);
  ctx.at_least("min_hessian_eigenvalue", worst_t, -1e-5);
}

void run_convexity(Context& ctx, Params& p) {
  const HamiltonianModel model = model_of(ctx.config);
  const int d = model.dimension();
  const DataModel data = data_of(ctx.config, d);
  const ConvexitySettings s = convexity_settings(p);
  p.finish();
  const Certificate cert = displacement_modulus(data, d);
  ctx.artifacts["certificates.json"] = json::array({cert.to_json()}).dump(2) + "\n";
  ctx.positive("kappa", cert.witness);
  convexity_checks(ctx, model, data, s, std::max(cert.witness, 0.0));
}

// ---------------------------------------------------------------- monotonicity

void run_monotonicity(Context& ctx, Params& p) {
  const HamiltonianModel model = model_of(ctx.config);
  const int d = model.dimension();
  const DataModel data = data_of(ctx.config, d);
  FunctionPtr reference = gaussian_function(1.0, 1.0);
  if (const json* r = p.raw("reference")) reference = function_from_json(*r);
  const bool propagate = p.flag("propagation", true);
  const ConvexitySettings s = convexity_settings(p);
  const double separation = p.number("witness_scan_max", 4.0, 0.1, 100.0);
  p.finish();
  if (d > 2) throw ConfigError("monotonicity experiment supports d <= 2");

  const Certificate ref = fourier_monotonicity(*reference, d);
  const Certificate ker = fourier_monotonicity(data.initial().phi1(), d);
  const Certificate mod = displacement_modulus(data, d);
  json certs = json::array();
  json r = ref.to_json();
  r["kernel"] = reference->to_json();
  certs.push_back(r);
  json k = ker.to_json();
  k["kernel"] = data.initial().phi1().to_json();
  certs.push_back(k);
  json mj = mod.to_json();
  const json phi1_spec = data.initial().phi1().to_json();
  if (phi1_spec.at("name") == "bump" && phi1_spec.at("amplitude").get<double>() != 1.0) {
    // the same cutoff at unit height, for comparison
    const FunctionPtr unit = bump_function(phi1_spec.at("inner").get<double>(),
                                           phi1_spec.at("outer").get<double>(), 1.0);
    const double l1 = min_hessian_eigenvalue_radial_scan(*unit, d, unit->support_radius());
    mj["details"]["unit_amplitude_lambda1"] = l1;
    mj["details"]["unit_amplitude_kappa"] = mod.details.at("lambda").get<double>() - 2 * std::abs(l1);
  }
  certs.push_back(mj);

  ctx.holds("reference_kernel_monotone", ref.verdict);
  ctx.holds("interaction_kernel_not_monotone", !ker.verdict);
  ctx.positive("kappa", mod.witness);

  // classical mixtures of 1/2(delta_{-s e1} + delta_{s e1}) and delta_0:
  // the curvature of t -> U0 is 1.5 phi1(0) - 2 phi1(s) + 0.5 phi1(2s)
  double best_curv = std::numeric_limits<double>::infinity(), best_s = 0.0;
  for (int j = 1; j <= 400; ++j) {
    const double sep = separation * j / 400.0;
    Vec pair = Vec::Zero(2 * d);
    pair(0) = -sep;
    pair(d) = sep;
    const EmpiricalMeasure mu(pair, d), nu(Vec::Zero(d), d);
    auto at = [&](double t) { return data.initial().value(classical_interpolate(mu, nu, t)); };
    const double h = 0.25;
    const double curv = (at(0.5 + h) - 2 * at(0.5) + at(0.5 - h)) / (h * h);
    if (curv < best_curv) {
      best_curv = curv;
      best_s = sep;
    }
  }
  certs.push_back({{"kind", "classical-concavity-witness"},
                   {"verdict", best_curv < 0.0},
                   {"witness", best_curv},
                   {"details", {{"separation", best_s}}}});
  ctx.at_most("classical_mixture_curvature", best_curv, -1e-9);

  // kappa-convexity along displacement geodesics between random measures
  Rng rng(ctx.seed + 7);
  double worst_second = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 8; ++trial) {
    const EmpiricalMeasure mu(uniform_ball_cloud(rng, 4, d, s.radius), d);
    const EmpiricalMeasure nu(uniform_ball_cloud(rng, 4, d, s.radius), d);
    const double w2 = std::pow(w2_distance(mu, nu).distance, 2);
    constexpr int n = 16;
    std::vector<double> f(n + 1);
    for (int j = 0; j <= n; ++j) {
      const double t = static_cast<double>(j) / n;
      f[j] = data.initial().value(displacement_interpolate(mu, nu, t)) - 0.5 * mod.witness * t * t * w2;
    }
    for (int j = 1; j < n; ++j) worst_second = std::min(worst_second, f[j + 1] - 2 * f[j] + f[j - 1]);
  }
  ctx.at_least("geodesic_kappa_convexity", worst_second, -1e-7);
  ctx.artifacts["certificates.json"] = certs.dump(2) + "\n";
  if (propagate) convexity_checks(ctx, model, data, s, std::max(mod.witness, 0.0));
}

// ---------------------------------------------------------------- blockode

void run_blockode(Context& ctx, Params& p) {
  const std::vector<int> ms = p.integers("ms", {8, 32, 128}, 2, 1024);
  const double t = p.number("t", 1.0, 0.0, 10.0);
  const int rk4_steps = p.integer("rk4_steps", 1024, 1, 1 << 20);
  const double tol = p.number("slope_tolerance", 0.25, 0.0, 10.0);
  std::vector<std::string> cases = {"1", "2", "kernel"};
  if (const json* raw = p.raw("cases")) {
    if (!raw->is_array() || raw->empty()) throw ConfigError("params.cases must be a non-empty array");
    cases.clear();
    for (const auto& c : *raw) {
      if (!c.is_string()) throw ConfigError("params.cases entries must be strings");
      cases.push_back(c.get<std::string>());
      block_case_from_name(cases.back());
    }
  }
  p.finish();
  if (ms.size() < 3) throw ConfigError("params.ms needs at least three entries");
  json records = json::array();
  double defect = 0.0;
  for (const std::string& name : cases) {
    std::vector<BlockRecord> recs;
    for (int m : ms) {
      BlockSystemSpec spec;
      spec.m = m;
      spec.which = block_case_from_name(name);
      spec.t = t;
      recs.push_back(block_ode_scaling(spec, rk4_steps));
      records.push_back(recs.back().to_json());
      defect = std::max(defect, recs.back().method_defect);
    }
    const std::vector<double> mx(ms.begin(), ms.end());
    for (std::size_t g = 0; g < recs.front().groups.size(); ++g) {
      std::vector<double> y;
      for (const auto& r : recs) y.push_back(r.groups[g].max_abs);
      const double slope = fit_loglog_slope(mx, y);
      ctx.at_most(fmt::format("slope_deviation_case{}_{}", name, recs.front().groups[g].name),
                  std::abs(slope - recs.front().groups[g].target_exponent), tol);
    }
  }
  ctx.artifacts["blockode.json"] = records.dump(2) + "\n";
  ctx.at_most("expm_vs_rk4", defect, 1e-8);
}

struct KindInfo {
  const char* name;
  void (*run)(Context&, Params&);
  const char* keys;
};

const std::vector<KindInfo>& kinds() {
  static const std::vector<KindInfo> table = {
      {"audit", run_audit,
       "model; params: radius=3, samples=100, transport_instances=200, transport_m_max=8, "
       "transport_d_max=3"},
      {"blockode", run_blockode,
       "params: ms=[8,32,128], cases=[\"1\",\"2\",\"kernel\"], t=1, rk4_steps=1024, "
       "slope_tolerance=0.25"},
      {"convexity", run_convexity,
       "model, data; params: times=[0.25,0.5,1], ms=[2,4,8], samples=2, radius=1.5"},
      {"counterexample", run_counterexample, "params: points=[[2,0]] as [t, q] pairs"},
      {"flow", run_flow,
       "model (dimension = largest d); params: instances=20, m_max=8, t_max=1, radius=1, "
       "random_data=true, steps=0"},
      {"master", run_master,
       "model, data; params: instances=10, m=3, t=0.5, radius=1, off_support=3, steps=0"},
      {"monotonicity", run_monotonicity,
       "model, data; params: reference=gaussian, propagation=true, times, ms, samples, radius, "
       "witness_scan_max=4"},
      {"scaling", run_scaling,
       "model, data; params: t=0.5, ms=[4,8,16,32], radius=1, seeds=16, third=false, "
       "time_derivative=true, slope_tolerance=0.35, steps=0"},
      {"value", run_value,
       "model, data; params: study=closed_form|hj_residual|method_agreement, samples=20, m_max, "
       "t_min=0.1, t_max=1, radius=1, steps=0"},
  };
  return table;
}

}  // namespace

bool RunResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const char* library_version() { return "0.1.0"; }

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::vector<std::string> experiment_kinds() {
  std::vector<std::string> out;
  for (const auto& k : kinds()) out.push_back(k.name);
  return out;
}

std::string experiment_catalog() {
  std::string out =
      "Config: {\"kind\": ..., \"seed\": 0, \"checks\": true, \"model\": {...}, \"data\": {...}, "
      "\"params\": {...}, \"output\": \"results/<kind>\"}\n\n";
  for (const auto& k : kinds()) out += fmt::format("{:<15} {}\n", k.name, k.keys);
  return out;
}

json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

RunResult run_experiment(const json& config, const RunOptions& options) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : config.items())
    if (k != "kind" && k != "seed" && k != "checks" && k != "model" && k != "data" &&
        k != "params" && k != "description" && k != "output")
      throw ConfigError("unknown config key '" + k + "'");
  if (!config.contains("kind") || !config.at("kind").is_string())
    throw ConfigError("config.kind must be a string");
  const std::string kind = config.at("kind").get<std::string>();
  const auto& table = kinds();
  const auto it = std::find_if(table.begin(), table.end(),
                               [&](const KindInfo& k) { return kind == k.name; });
  if (it == table.end()) throw ConfigError("unknown experiment kind '" + kind + "'");
  if (options.threads < 1) throw ConfigError("thread count must be positive");

  Context ctx;
  ctx.config = config;
  if (config.contains("seed")) {
    if (!config.at("seed").is_number_unsigned()) throw ConfigError("config.seed must be a nonnegative integer");
    ctx.seed = config.at("seed").get<std::uint64_t>();
  }
  if (options.seed) ctx.seed = *options.seed;
  if (config.contains("output") && !config.at("output").is_string())
    throw ConfigError("config.output must be a string");
  if (config.contains("checks")) {
    if (!config.at("checks").is_boolean()) throw ConfigError("config.checks must be a boolean");
    ctx.checks_enabled = config.at("checks").get<bool>();
  }
  const json empty = json::object();
  Params params(config.contains("params") ? config.at("params") : empty);

  const auto start = std::chrono::steady_clock::now();
  try {
    it->run(ctx, params);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  RunResult res;
  res.kind = kind;
  res.seed = ctx.seed;
  res.checks = ctx.checks_enabled ? ctx.checks : std::vector<CheckResult>{};
  res.artifacts = std::move(ctx.artifacts);
  res.status = res.passed() ? RunStatus::Passed : RunStatus::ChecksFailed;
  json checks = json::array();
  for (const auto& c : res.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}});
  json files = json::array();
  for (const auto& [name, content] : res.artifacts) files.push_back(name);
  res.manifest = {{"kind", kind},
                  {"config_hash", config_hash(config)},
                  {"seed", ctx.seed},
                  {"threads", options.threads},
                  {"versions",
                   {{"mfglab", library_version()},
                    {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                          EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__}}},
                  {"wall_time_s", wall},
                  {"checks", checks},
                  {"passed", res.passed()},
                  {"artifacts", files}};
  return res;
}

void write_artifacts(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << content;
  };
  for (const auto& [name, content] : result.artifacts) put(name, content);
  put("manifest.json", result.manifest.dump(2) + "\n");
}

}  // namespace mfglab
