#pragma once

#include "mfglab/functions.hpp"
#include "mfglab/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace mfglab {

/// Mechanical Hamiltonian H(q,p) = 1/2 p.A^{-1}p - g(q) with Lagrangian
/// L(q,v) = 1/2 v.Av + g(q).
class HamiltonianModel {
 public:
  /// Throws ModelError unless A is d x d, symmetric and positive definite.
  HamiltonianModel(int dimension, Mat kinetic, FunctionPtr potential);

  /// Shorthand for A = I.
  static HamiltonianModel standard(int dimension, FunctionPtr potential = zero_function());

  /// {"dimension": d, "kinetic": scalar | matrix, "potential": {...}}
  static HamiltonianModel from_json(const nlohmann::json& spec);
  nlohmann::json to_json() const;

  int dimension() const { return d_; }
  const Mat& kinetic() const { return a_; }
  const Mat& kinetic_inverse() const { return a_inv_; }
  const ScalarFunction& potential() const { return *g_; }
  const FunctionPtr& potential_ptr() const { return g_; }
  /// Smallest eigenvalue of A.
  double kappa3() const { return kappa3_; }
  bool potential_is_zero() const { return g_->is_zero(); }

  double H(const Vec& q, const Vec& p) const;
  double L(const Vec& q, const Vec& v) const;

  Vec dpH(const Vec& q, const Vec& p) const;
  Vec dqH(const Vec& q, const Vec& p) const;
  Vec dvL(const Vec& q, const Vec& v) const;
  Vec dqL(const Vec& q, const Vec& v) const;

  /// Hessians of H and L in the joint variable (q, p) resp. (q, v).
  Mat hessian_H(const Vec& q, const Vec& p) const;
  Mat hessian_L(const Vec& q, const Vec& v) const;
  /// Third derivatives in the joint variable.
  Tensor3 third_H(const Vec& q, const Vec& p) const;
  Tensor3 third_L(const Vec& q, const Vec& v) const;

 private:
  int d_;
  Mat a_;
  Mat a_inv_;
  FunctionPtr g_;
  double kappa3_;
};

struct AuditRegion {
  double radius = 1.0;
  int samples = 100;
  std::uint64_t seed = 0;

  /// Throws InvalidInput unless radius > 0 and samples >= 1.
  void validate() const;
};

struct AuditReport {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  double tolerance = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

/// Legendre duality defect and the two gradient round trips.
AuditReport legendre_check(const HamiltonianModel& model, const AuditRegion& region,
                           double tolerance = 1e-8);

/// Central differences of H and L against the analytic derivatives of
/// orders one to three. Also reports the fitted growth constant for D_qH,
/// the Lipschitz bound kappa0 of DH and DL on the region, and whether L >= 0.
AuditReport derivative_check(const HamiltonianModel& model, const AuditRegion& region,
                             double tolerance = 1e-5);

}  // namespace mfglab
