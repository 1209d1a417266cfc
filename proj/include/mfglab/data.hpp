#pragma once

#include "mfglab/functions.hpp"
#include "mfglab/measures.hpp"
#include "mfglab/types.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace mfglab {

/// G(mu) = int phi dmu + 1/2 int int phi1(x - y) dmu dmu and its m-particle
/// restriction G^(m)(q) = (1/m) sum phi(q_i) + 1/(2m^2) sum_ij phi1(q_i - q_j).
class ConvolutionFunctional {
 public:
  ConvolutionFunctional(FunctionPtr phi, FunctionPtr phi1);

  const ScalarFunction& phi() const { return *phi_; }
  const ScalarFunction& phi1() const { return *phi1_; }
  const FunctionPtr& phi_ptr() const { return phi_; }
  const FunctionPtr& phi1_ptr() const { return phi1_; }
  bool is_zero() const { return phi_->is_zero() && phi1_->is_zero(); }
  bool has_interaction() const { return !phi1_->is_zero(); }

  double value(const WeightedMeasure& mu) const;
  double value(const EmpiricalMeasure& mu) const;

  /// Restriction to configurations q (flattened, particle dimension d).
  double restricted(const Vec& q, int d) const;
  Vec restricted_gradient(const Vec& q, int d) const;
  Mat restricted_hessian(const Vec& q, int d) const;
  Tensor3 restricted_third(const Vec& q, int d) const;

  /// Pointwise datum g(x, mu) = phi(x) + sum_i w_i phi1(x - q_i).
  double pointwise(const Vec& x, const WeightedMeasure& mu) const;
  /// D_x g(x, mu), which is also the Wasserstein gradient of G at x.
  Vec pointwise_gradient(const Vec& x, const WeightedMeasure& mu) const;
  Mat pointwise_hessian(const Vec& x, const WeightedMeasure& mu) const;

  /// D_{q_i} of g^(m)(x, q) = phi(x) + (1/m) sum phi1(x - q_i), flattened.
  Vec pointwise_particle_gradient(const Vec& x, const Vec& q, int d) const;

 private:
  FunctionPtr phi_;
  FunctionPtr phi1_;
};

/// Initial datum U0 / u0 and running coupling F / f.
class DataModel {
 public:
  DataModel(FunctionPtr phi, FunctionPtr phi1, FunctionPtr f_phi = zero_function(),
            FunctionPtr f_phi1 = zero_function());

  /// Keys phi, phi1, f_phi, f_phi1 (all optional, default zero) and
  /// require_convex (bool): when set, D^2 phi + D^2 phi1 >= 0 is checked
  /// on a radial scan of the given dimension.
  static DataModel from_json(const nlohmann::json& spec, int dimension);
  nlohmann::json to_json() const;

  const ConvolutionFunctional& initial() const { return initial_; }
  const ConvolutionFunctional& coupling() const { return coupling_; }

  /// Minimum Hessian eigenvalue of phi resp. phi1 from a radial scan.
  double lambda(int dimension) const;
  double lambda1(int dimension) const;

  /// phi1(x) = phi1(-x) at seeded samples; throws InvalidInput otherwise.
  void require_even(int dimension, double tol = 1e-12) const;

  /// D^2 phi + D^2 phi1 >= -tol along a radial scan; throws InvalidInput otherwise.
  void require_convex(int dimension, double tol = 1e-12) const;

 private:
  ConvolutionFunctional initial_;
  ConvolutionFunctional coupling_;
};

struct Certificate {
  std::string kind;
  bool verdict = false;
  double witness = 0.0;
  nlohmann::json details = nlohmann::json::object();
  nlohmann::json to_json() const;
};

struct FourierGrid {
  /// 0 selects 2^8 for d = 1 and 2^6 per axis otherwise.
  int points_per_axis = 0;
  /// Box half-width as a multiple of the kernel's support radius.
  double box_factor = 8.0;
  double tolerance = 1e-8;
};

/// Truncated cosine transform of phi1 on a symmetric frequency grid.
/// Throws ResolutionError when phi1 is not integrable or carries mass near
/// the box boundary.
Certificate fourier_monotonicity(const ScalarFunction& phi1, int dimension,
                                 const FourierGrid& grid = {});

/// kappa = lambda - 2|lambda1|; displacement convex iff kappa > 0.
Certificate displacement_modulus(double lambda, double lambda1);
Certificate displacement_modulus(const DataModel& data, int dimension);

struct ConvexityReport {
  double worst_eigenvalue = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::vector<double> per_sample;
};

/// Finite-difference Hessian (step 1e-3) at every sample; passes iff the
/// minimum eigenvalue is at least lambda/m - tol everywhere.
ConvexityReport discrete_convexity_check(const std::function<double(const Vec&)>& evaluator,
                                         int m, double lambda, const std::vector<Vec>& samples,
                                         double tol = 1e-6);

/// Central second differences of f with step h.
Mat finite_difference_hessian(const std::function<double(const Vec&)>& f, const Vec& x,
                              double h);

/// C^2 radial cutoff equal to 1 on B_inner and 0 outside B_outer.
FunctionPtr bump_phi1(double inner, double outer);

}  // namespace mfglab
