#pragma once

#include "mfglab/data.hpp"
#include "mfglab/flow.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mfglab {

enum class ValueMethod { Characteristics, Direct };

std::string value_method_name(ValueMethod method);

struct ValueSample {
  double t = 0.0;
  Vec q;
  double value = 0.0;
  /// D_{q_i} U^(m)(t, q), flattened.
  Vec gradient;
  ValueMethod method = ValueMethod::Characteristics;
  /// Initial point of the optimal characteristic (characteristics only).
  Vec z;
};

/// U^(m)(t, q) by characteristics (BVP + Simpson action) or by direct
/// minimisation of the discretised action (Newton on 64- and 128-node
/// piecewise-linear paths, Richardson-extrapolated).
ValueSample value(const HamiltonianModel& model, const DataModel& data, double t, const Vec& q,
                  ValueMethod method = ValueMethod::Characteristics, int steps = 0,
                  const Vec* warm_start = nullptr);

/// Discrete action minimum on an n-node path (no extrapolation).
ValueSample direct_value(const HamiltonianModel& model, const DataModel& data, double t,
                         const Vec& q, int nodes);

/// grad_w U(t, mu)(q_i) = m eta_i(t), flattened per particle.
Vec wasserstein_gradient(const HamiltonianModel& model, const DataModel& data, double t,
                         const EmpiricalMeasure& mu, int steps = 0);

/// m times central differences (step 1e-4 (1 + |q_i|)) of value() in each
/// particle, flattened.
Vec wasserstein_gradient_fd(const HamiltonianModel& model, const DataModel& data, double t,
                            const EmpiricalMeasure& mu, int steps = 0);

enum class HessianMethod { FiniteDifference, Variational };

struct HessianKernel {
  int m = 0;
  int d = 0;
  /// D^2 U^(m)(t, q), symmetrised.
  Mat hessian;
  /// Lambda0(q_i) = m D^2_{q_i q_i} U^(m)
  std::vector<Mat> lambda0;
  /// Lambda1(q_i, q_j) = m^2 D^2_{q_i q_j} U^(m), i != j, stored as an
  /// md x md matrix with zero diagonal blocks.
  Mat lambda1;
  /// Symmetry defects of the raw (unsymmetrised) estimate.
  double lambda0_asymmetry = 0.0;
  double lambda1_asymmetry = 0.0;

  Mat lambda1_block(int i, int j) const { return block(lambda1, i, j, d); }
};

/// FiniteDifference: central differences of D_q U^(m) (step 1e-4 (1 + |q_i|)).
/// Variational: D_z eta (D_z xi)^{-1} at the terminal time.
HessianKernel hessian_kernel(const HamiltonianModel& model, const DataModel& data, double t,
                             const EmpiricalMeasure& mu,
                             HessianMethod method = HessianMethod::FiniteDifference,
                             int steps = 0);

/// |dU/dt + H^m(q, D_q U) - F^m(q)| with a central time difference of step
/// 1e-3 t at a fixed step count.
double hj_residual(const HamiltonianModel& model, const DataModel& data, double t, const Vec& q,
                   int steps = 0);

struct ScalingOptions {
  double t = 0.5;
  std::vector<int> ms{4, 8, 16, 32};
  double radius = 1.0;
  int seeds = 16;
  std::uint64_t seed = 0;
  bool third = false;
  bool time_derivative = true;
  double slope_tolerance = 0.35;
  int steps = 0;
};

struct ScalingClass {
  std::string name;
  double target = 0.0;
  std::vector<double> max_abs;
  double fitted = 0.0;
  bool pass = false;
};

struct ScalingReport {
  std::vector<int> ms;
  std::vector<ScalingClass> classes;
  bool passed() const;
  /// Columns (m, class, max_abs, target_slope, fitted_slope, pass).
  std::string to_csv() const;
};

/// Least-squares slope of log y against log x.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

ScalingReport scaling_study(const HamiltonianModel& model, const DataModel& data,
                            const ScalingOptions& options);

struct ConvexityEvolution {
  std::vector<double> times;
  std::vector<double> min_eigenvalue;
  double worst = 0.0;
  bool passed = false;
};

/// Minimum eigenvalue of the finite-difference Hessian of U^(m)(t, .) at mu
/// for each t in the grid; passes iff all are >= -tol.
ConvexityEvolution convexity_evolution(const HamiltonianModel& model, const DataModel& data,
                                       const std::vector<double>& times,
                                       const EmpiricalMeasure& mu, double tol = 1e-5);

}  // namespace mfglab
