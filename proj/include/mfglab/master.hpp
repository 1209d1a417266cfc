#pragma once

#include "mfglab/data.hpp"
#include "mfglab/flow.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/model.hpp"

#include <string>
#include <vector>

namespace mfglab {

/// sigma_s = empirical measure of the optimal characteristics ending at mu.
struct MeasurePath {
  PhaseTrajectory trajectory;
  const std::vector<double>& times() const { return trajectory.times; }
  EmpiricalMeasure at(std::size_t k) const;
  /// max over consecutive samples of W2(sigma_s, sigma_s') / |s - s'|.
  double fitted_speed() const;
  double max_second_moment() const;
};

MeasurePath measure_flow(const HamiltonianModel& model, const DataModel& data,
                         const EmpiricalMeasure& mu, double t, int steps = 0);

enum class AgentMethod { Shooting, Direct };

struct MasterOptions {
  int steps = 0;
  /// Skip shooting and minimise the discretised path directly.
  bool force_direct = false;
};

struct MasterSample {
  double t = 0.0;
  Vec q0;
  double u = 0.0;
  /// Costate P(t) of the optimal path; equals D_{q0} u where u is smooth.
  Vec costate;
  AgentMethod method = AgentMethod::Shooting;
  std::vector<double> times;
  std::vector<Vec> path;
  /// Initial point of the population characteristics, reusable as a warm start.
  Vec population_start;
};

/// u(t, q0, mu): single-agent control problem against the frozen optimal
/// measure path, by shooting with a direct-minimisation fallback. Throws
/// OptimizationFailure when both fail.
MasterSample master_value(const HamiltonianModel& model, const DataModel& data, double t,
                          const Vec& q0, const EmpiricalMeasure& mu, const MasterOptions& opt = {},
                          const Vec* population_warm_start = nullptr);

/// Action along particle i of the m-particle optimal characteristics, i.e.
/// u(t, q_i, mu) through the restriction identity for q0 in spt mu.
double restricted_particle_value(const HamiltonianModel& model, const DataModel& data, double t,
                                 const EmpiricalMeasure& mu, int i, int steps = 0);

struct MasterGradient {
  Vec dq0u;
  /// Phi1(q_i) = m D_{q_i} u, flattened per particle.
  Vec phi1;
  double dtu = 0.0;
  double u = 0.0;
};

/// Central differences of master_value: step 1e-4 (1 + |x|) in space and
/// 1e-3 t in time at a fixed step count.
MasterGradient master_gradient(const HamiltonianModel& model, const DataModel& data, double t,
                               const Vec& q0, const EmpiricalMeasure& mu,
                               const MasterOptions& opt = {});

double scalar_master_residual(const HamiltonianModel& model, const DataModel& data, double t,
                              const Vec& q0, const EmpiricalMeasure& mu,
                              const MasterOptions& opt = {});

/// The same residual from precomputed derivatives; wgrad is grad_w U(t, mu)
/// at the particles.
double scalar_master_residual(const HamiltonianModel& model, const DataModel& data,
                              const Vec& q0, const EmpiricalMeasure& mu, const MasterGradient& g,
                              const Vec& wgrad);

double vectorial_master_residual(const HamiltonianModel& model, const DataModel& data, double t,
                                 const EmpiricalMeasure& mu, int i, int steps = 0);

struct HopfLaxResult {
  double t = 0.0;
  double q = 0.0;
  double value = 0.0;
  std::vector<double> minimizers;
  /// (q - y)/t over the minimizers: the extreme superdifferential slopes.
  double superdiff_lo = 0.0;
  double superdiff_hi = 0.0;
  std::vector<double> critical_points;
};

/// min_y |y - q|^2 / (2t) - sqrt(1 + y^2) through its critical points.
HopfLaxResult counterexample_hopf_lax(double t, double q);

}  // namespace mfglab
