#pragma once

#include "mfglab/data.hpp"
#include "mfglab/model.hpp"
#include "mfglab/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace mfglab {

/// Default fixed step count: 256 per unit time, rounded up to an even number
/// (Simpson quadrature on the sample grid needs an even count), at least 2.
int default_steps(double t);

/// Time-sampled m-particle state. xi and eta are flattened configurations;
/// dxi and deta, when present, hold Jacobian columns (md x k).
struct PhaseTrajectory {
  int m = 0;
  int d = 0;
  std::vector<double> times;
  std::vector<Vec> xi;
  std::vector<Vec> eta;
  std::vector<Mat> dxi;
  std::vector<Mat> deta;

  bool has_jacobian() const { return !dxi.empty(); }
  const Vec& final_xi() const { return xi.back(); }
  const Vec& final_eta() const { return eta.back(); }
  /// Rows (s, particle, coord, xi, eta) with a header line.
  std::string to_csv() const;
};

/// Right-hand side of the m-particle system at a phase state (no Jacobians).
void phase_vector_field(const HamiltonianModel& model, const DataModel& data, const Vec& xi,
                        const Vec& eta, Vec& dxi, Vec& deta);

/// Integrate the raw phase system from (xi0, eta0). When j0xi/j0eta are
/// non-empty their columns are propagated through the variational system.
/// Throws BlowUpError on non-finite or oversized state.
PhaseTrajectory integrate_phase(const HamiltonianModel& model, const DataModel& data,
                                const Vec& xi0, const Vec& eta0, double t, int steps,
                                const Mat& j0xi = Mat(), const Mat& j0eta = Mat());

/// Flow started on the graph of D U0^(m): eta(0) = D U0^(m)(z). With
/// jacobian set, the full md x md Jacobians D_z xi, D_z eta are carried.
PhaseTrajectory integrate_forward(const HamiltonianModel& model, const DataModel& data,
                                  const Vec& z, double t, int steps = 0, bool jacobian = false);

/// Jacobian columns D_{z_j} xi, D_{z_j} eta (md x d) along the flow.
PhaseTrajectory variational_integrate(const HamiltonianModel& model, const DataModel& data,
                                      const Vec& z, double t, int steps, int j);

struct DeterminantReport {
  std::vector<double> times;
  std::vector<double> direct;
  std::vector<double> jacobi;
  double max_relative_defect = 0.0;
  double min_determinant = 0.0;
};

/// det D_z xi along the flow, directly and through exp of the integrated
/// trace of the closed-loop linearisation. Throws ConjugatePointError when
/// the determinant changes sign.
DeterminantReport jacobian_determinant(const HamiltonianModel& model, const DataModel& data,
                                       const Vec& z, double t, int steps = 0);

struct InversionResult {
  Vec z;
  double residual = 0.0;
  int iterations = 0;
  /// Forward trajectory from z with full Jacobians.
  PhaseTrajectory trajectory;
};

/// Solve xi(t, z) = q. Newton with halving line search, relaxed fixed-point
/// fallback; throws InversionFailure after 60 iterations.
InversionResult invert_flow(const HamiltonianModel& model, const DataModel& data, const Vec& q,
                            double t, int steps = 0, const Vec* warm_start = nullptr);

/// Characteristic through q at time t: the forward flow from invert_flow(q).
/// The returned trajectory carries full Jacobians.
PhaseTrajectory solve_bvp(const HamiltonianModel& model, const DataModel& data, const Vec& q,
                          double t, int steps = 0, const Vec* warm_start = nullptr);

/// Discrete action A(S) = U0^(m)(S(0)) + int_0^t [L^m(S, dS/ds) + F^m(S)] ds
/// along a sampled trajectory, by Simpson's rule.
double trajectory_action(const HamiltonianModel& model, const DataModel& data,
                         const PhaseTrajectory& traj);

enum class BlockCase { Forced, Paired, Kernel };

struct BlockSystemSpec {
  int m = 8;
  BlockCase which = BlockCase::Forced;
  double t = 1.0;
  /// distinguished index for Forced, the pair (j, k) for Paired
  int i0 = 0;
  int j = 0;
  int k = 1;
};

struct BlockGroup {
  std::string name;
  double max_abs = 0.0;
  double target_exponent = 0.0;
};

struct BlockRecord {
  BlockSystemSpec spec;
  std::vector<BlockGroup> groups;
  /// Worst relative disagreement between expm and RK4, over groups.
  double method_defect = 0.0;
  nlohmann::json to_json() const;
};

BlockRecord block_ode_scaling(const BlockSystemSpec& spec, int rk4_steps = 1024);

std::string block_case_name(BlockCase c);
BlockCase block_case_from_name(const std::string& name);

}  // namespace mfglab
