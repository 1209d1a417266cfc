#pragma once

#include "mfglab/types.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>

namespace mfglab {

/// Smooth scalar map R^d -> R with analytic derivatives up to order three.
///
/// Implementations are immutable; share them through FunctionPtr.
class ScalarFunction {
 public:
  virtual ~ScalarFunction() = default;

  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  virtual Mat hessian(const Vec& x) const = 0;
  virtual Tensor3 third(const Vec& x) const = 0;

  /// A constant C with |Df(x)| <= C (1 + |x|) on R^d.
  virtual double growth_constant(int dimension) const = 0;

  /// Radius outside which |f| is below double-precision noise; infinity
  /// for functions that are not integrable.
  virtual double support_radius() const = 0;

  virtual bool is_zero() const { return false; }
  virtual bool is_radial() const { return false; }
  virtual nlohmann::json to_json() const = 0;
};

using FunctionPtr = std::shared_ptr<const ScalarFunction>;

FunctionPtr zero_function();
/// (lambda/2)|x|^2
FunctionPtr quadratic_function(double lambda);
/// -alpha sqrt(1 + |x|^2)
FunctionPtr soft_norm_function(double alpha);
/// alpha sum_k cos(x_k)
FunctionPtr cosine_ridge_function(double alpha);
/// amplitude exp(-|x|^2 / width^2)
FunctionPtr gaussian_function(double amplitude, double width = 1.0);
/// amplitude times a C^2 radial cutoff: 1 on B_inner, 0 outside B_outer,
/// quintic smoothstep of the radius in between. Throws InvalidInput unless
/// 0 < inner < outer.
FunctionPtr bump_function(double inner, double outer, double amplitude = 1.0);
FunctionPtr sum_function(FunctionPtr a, FunctionPtr b);

/// Build from {"name": ..., params...}; throws ConfigError on unknown names
/// or missing parameters.
FunctionPtr function_from_json(const nlohmann::json& spec);

/// Minimum Hessian eigenvalue of f along the ray r e_1, r in [0, radius],
/// sampled at `radii` points and refined around the worst sample.
double min_hessian_eigenvalue_radial_scan(const ScalarFunction& f, int dimension,
                                          double radius, int radii = 201);

}  // namespace mfglab
