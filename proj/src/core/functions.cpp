#include "mfglab/functions.hpp"

#include "mfglab/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <utility>

namespace mfglab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Radial functions written as f(x) = k(s) with s = |x|^2, which keeps the
// derivative formulas regular at the origin.
class RadialFunction : public ScalarFunction {
 public:
  struct Profile {
    double k0, k1, k2, k3;
  };

  double value(const Vec& x) const override { return profile(x.squaredNorm()).k0; }

  Vec gradient(const Vec& x) const override {
    return 2.0 * profile(x.squaredNorm()).k1 * x;
  }

  Mat hessian(const Vec& x) const override {
    const Profile p = profile(x.squaredNorm());
    const auto n = x.size();
    return 4.0 * p.k2 * x * x.transpose() + 2.0 * p.k1 * Mat::Identity(n, n);
  }

  Tensor3 third(const Vec& x) const override {
    const Profile p = profile(x.squaredNorm());
    const int n = static_cast<int>(x.size());
    Tensor3 t(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double v = 8.0 * p.k3 * x(a) * x(b) * x(c);
          if (a == b) v += 4.0 * p.k2 * x(c);
          if (a == c) v += 4.0 * p.k2 * x(b);
          if (b == c) v += 4.0 * p.k2 * x(a);
          t(a, b, c) = v;
        }
    return t;
  }

  bool is_radial() const override { return true; }

 protected:
  virtual Profile profile(double s) const = 0;
};

class ZeroFunction final : public ScalarFunction {
 public:
  double value(const Vec&) const override { return 0.0; }
  Vec gradient(const Vec& x) const override { return Vec::Zero(x.size()); }
  Mat hessian(const Vec& x) const override { return Mat::Zero(x.size(), x.size()); }
  Tensor3 third(const Vec& x) const override { return Tensor3(static_cast<int>(x.size())); }
  double growth_constant(int) const override { return 0.0; }
  double support_radius() const override { return 0.0; }
  bool is_zero() const override { return true; }
  nlohmann::json to_json() const override { return {{"name", "zero"}}; }
};

class QuadraticFunction final : public RadialFunction {
 public:
  explicit QuadraticFunction(double lambda) : lambda_(lambda) {}
  double growth_constant(int) const override { return std::abs(lambda_); }
  double support_radius() const override { return lambda_ == 0.0 ? 0.0 : kInf; }
  bool is_zero() const override { return lambda_ == 0.0; }
  nlohmann::json to_json() const override {
    return {{"name", "quadratic"}, {"lambda", lambda_}};
  }

 protected:
  Profile profile(double s) const override { return {0.5 * lambda_ * s, 0.5 * lambda_, 0.0, 0.0}; }

 private:
  double lambda_;
};

class SoftNormFunction final : public RadialFunction {
 public:
  explicit SoftNormFunction(double alpha) : alpha_(alpha) {}
  double growth_constant(int) const override { return std::abs(alpha_); }
  double support_radius() const override { return alpha_ == 0.0 ? 0.0 : kInf; }
  bool is_zero() const override { return alpha_ == 0.0; }
  nlohmann::json to_json() const override {
    return {{"name", "soft_norm"}, {"alpha", alpha_}};
  }

 protected:
  Profile profile(double s) const override {
    const double r = std::sqrt(1.0 + s);
    return {-alpha_ * r, -alpha_ / (2.0 * r), alpha_ / (4.0 * r * r * r),
            -3.0 * alpha_ / (8.0 * r * r * r * r * r)};
  }

 private:
  double alpha_;
};

class GaussianFunction final : public RadialFunction {
 public:
  GaussianFunction(double amplitude, double width) : amplitude_(amplitude), width_(width) {
    if (!(width > 0.0)) throw InvalidInput("gaussian width must be positive");
  }
  double growth_constant(int) const override {
    // max_x |2 k'(s) x| = a sqrt(2) e^{-1/2} / w
    return std::abs(amplitude_) * std::sqrt(2.0) * std::exp(-0.5) / width_;
  }
  double support_radius() const override {
    // exp(-r^2/w^2) < 2^-53 beyond r = w sqrt(53 ln 2)
    return amplitude_ == 0.0 ? 0.0 : width_ * std::sqrt(53.0 * std::log(2.0));
  }
  bool is_zero() const override { return amplitude_ == 0.0; }
  nlohmann::json to_json() const override {
    return {{"name", "gaussian"}, {"amplitude", amplitude_}, {"width", width_}};
  }

 protected:
  Profile profile(double s) const override {
    const double w2 = width_ * width_;
    const double e = amplitude_ * std::exp(-s / w2);
    return {e, -e / w2, e / (w2 * w2), -e / (w2 * w2 * w2)};
  }

 private:
  double amplitude_, width_;
};

// 1 - (10 x^3 - 15 x^4 + 6 x^5): C^2 transition from 1 to 0 on [0, 1].
struct Smoothstep {
  double v, d1, d2, d3;
};

Smoothstep falling_quintic(double x) {
  if (x <= 0.0) return {1.0, 0.0, 0.0, 0.0};
  if (x >= 1.0) return {0.0, 0.0, 0.0, 0.0};
  const double x2 = x * x, x3 = x2 * x;
  return {1.0 - (10.0 * x3 - 15.0 * x2 * x2 + 6.0 * x3 * x2),
          -(30.0 * x2 - 60.0 * x3 + 30.0 * x2 * x2),
          -(60.0 * x - 180.0 * x2 + 120.0 * x3),
          -(60.0 - 360.0 * x + 360.0 * x2)};
}

class BumpFunction final : public RadialFunction {
 public:
  BumpFunction(double inner, double outer, double amplitude)
      : inner_(inner), outer_(outer), amplitude_(amplitude) {
    if (!(inner > 0.0) || !(inner < outer))
      throw InvalidInput("bump requires 0 < inner < outer");
  }
  double growth_constant(int) const override {
    return std::abs(amplitude_) * 1.875 / (outer_ - inner_);
  }
  double support_radius() const override { return outer_; }
  bool is_zero() const override { return amplitude_ == 0.0; }
  nlohmann::json to_json() const override {
    return {{"name", "bump"}, {"inner", inner_}, {"outer", outer_}, {"amplitude", amplitude_}};
  }

 protected:
  Profile profile(double s) const override {
    const double r = std::sqrt(s);
    if (r <= inner_) return {amplitude_, 0.0, 0.0, 0.0};
    if (r >= outer_) return {0.0, 0.0, 0.0, 0.0};
    const double w = outer_ - inner_;
    const Smoothstep st = falling_quintic((r - inner_) / w);
    const double rho0 = amplitude_ * st.v;
    const double rho1 = amplitude_ * st.d1 / w;
    const double rho2 = amplitude_ * st.d2 / (w * w);
    const double rho3 = amplitude_ * st.d3 / (w * w * w);
    // chain rule for k(s) = rho(sqrt(s))
    const double k1 = rho1 / (2.0 * r);
    const double k2 = (rho2 * r - rho1) / (4.0 * r * r * r);
    const double k3 = (rho3 * r * r - 3.0 * rho2 * r + 3.0 * rho1) / (8.0 * std::pow(r, 5));
    return {rho0, k1, k2, k3};
  }

 private:
  double inner_, outer_, amplitude_;
};

class CosineRidgeFunction final : public ScalarFunction {
 public:
  explicit CosineRidgeFunction(double alpha) : alpha_(alpha) {}
  double value(const Vec& x) const override { return alpha_ * x.array().cos().sum(); }
  Vec gradient(const Vec& x) const override { return -alpha_ * x.array().sin().matrix(); }
  Mat hessian(const Vec& x) const override {
    return (-alpha_ * x.array().cos()).matrix().asDiagonal();
  }
  Tensor3 third(const Vec& x) const override {
    const int n = static_cast<int>(x.size());
    Tensor3 t(n);
    for (int a = 0; a < n; ++a) t(a, a, a) = alpha_ * std::sin(x(a));
    return t;
  }
  double growth_constant(int dimension) const override {
    return std::abs(alpha_) * std::sqrt(static_cast<double>(dimension));
  }
  double support_radius() const override { return alpha_ == 0.0 ? 0.0 : kInf; }
  bool is_zero() const override { return alpha_ == 0.0; }
  nlohmann::json to_json() const override {
    return {{"name", "cosine"}, {"alpha", alpha_}};
  }

 private:
  double alpha_;
};

class SumFunction final : public ScalarFunction {
 public:
  SumFunction(FunctionPtr a, FunctionPtr b) : a_(std::move(a)), b_(std::move(b)) {}
  double value(const Vec& x) const override { return a_->value(x) + b_->value(x); }
  Vec gradient(const Vec& x) const override { return a_->gradient(x) + b_->gradient(x); }
  Mat hessian(const Vec& x) const override { return a_->hessian(x) + b_->hessian(x); }
  Tensor3 third(const Vec& x) const override {
    Tensor3 t = a_->third(x);
    t += b_->third(x);
    return t;
  }
  double growth_constant(int d) const override {
    return a_->growth_constant(d) + b_->growth_constant(d);
  }
  double support_radius() const override {
    return std::max(a_->support_radius(), b_->support_radius());
  }
  bool is_zero() const override { return a_->is_zero() && b_->is_zero(); }
  bool is_radial() const override { return a_->is_radial() && b_->is_radial(); }
  nlohmann::json to_json() const override {
    return {{"name", "sum"}, {"terms", {a_->to_json(), b_->to_json()}}};
  }

 private:
  FunctionPtr a_, b_;
};

double number(const nlohmann::json& spec, const char* key, double fallback) {
  if (!spec.contains(key)) return fallback;
  if (!spec.at(key).is_number())
    throw ConfigError(std::string("parameter '") + key + "' must be a number");
  return spec.at(key).get<double>();
}

double required_number(const nlohmann::json& spec, const char* key) {
  if (!spec.contains(key))
    throw ConfigError(std::string("missing parameter '") + key + "'");
  return number(spec, key, 0.0);
}

}  // namespace

FunctionPtr zero_function() { return std::make_shared<ZeroFunction>(); }
FunctionPtr quadratic_function(double lambda) { return std::make_shared<QuadraticFunction>(lambda); }
FunctionPtr soft_norm_function(double alpha) { return std::make_shared<SoftNormFunction>(alpha); }
FunctionPtr cosine_ridge_function(double alpha) { return std::make_shared<CosineRidgeFunction>(alpha); }
FunctionPtr gaussian_function(double amplitude, double width) {
  return std::make_shared<GaussianFunction>(amplitude, width);
}
FunctionPtr bump_function(double inner, double outer, double amplitude) {
  return std::make_shared<BumpFunction>(inner, outer, amplitude);
}
FunctionPtr sum_function(FunctionPtr a, FunctionPtr b) {
  return std::make_shared<SumFunction>(std::move(a), std::move(b));
}

FunctionPtr function_from_json(const nlohmann::json& spec) {
  if (spec.is_string()) return function_from_json(nlohmann::json{{"name", spec}});
  if (!spec.is_object() || !spec.contains("name") || !spec.at("name").is_string())
    throw ConfigError("function spec must be an object with a string 'name'");
  const std::string name = spec.at("name").get<std::string>();
  try {
    if (name == "zero") return zero_function();
    if (name == "quadratic") return quadratic_function(required_number(spec, "lambda"));
    if (name == "soft_norm") return soft_norm_function(number(spec, "alpha", 1.0));
    if (name == "cosine") return cosine_ridge_function(number(spec, "alpha", 1.0));
    if (name == "gaussian")
      return gaussian_function(number(spec, "amplitude", 1.0), number(spec, "width", 1.0));
    if (name == "bump")
      return bump_function(number(spec, "inner", 1.0), number(spec, "outer", 2.0),
                           number(spec, "amplitude", 1.0));
    if (name == "sum") {
      if (!spec.contains("terms") || !spec.at("terms").is_array() || spec.at("terms").empty())
        throw ConfigError("sum requires a non-empty 'terms' array");
      FunctionPtr acc = function_from_json(spec.at("terms").at(0));
      for (std::size_t k = 1; k < spec.at("terms").size(); ++k)
        acc = sum_function(acc, function_from_json(spec.at("terms").at(k)));
      return acc;
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(name + ": " + e.what());
  }
  throw ConfigError("unknown function '" + name + "'");
}

double min_hessian_eigenvalue_radial_scan(const ScalarFunction& f, int dimension,
                                          double radius, int radii) {
  if (radii < 2) throw InvalidInput("radial scan needs at least two radii");
  auto min_eig = [&](double r) {
    Vec x = Vec::Zero(dimension);
    x(0) = r;
    Eigen::SelfAdjointEigenSolver<Mat> es(f.hessian(x), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  };
  const double h = radius / (radii - 1);
  int worst = 0;
  double best = min_eig(0.0);
  for (int k = 1; k < radii; ++k) {
    const double v = min_eig(k * h);
    if (v < best) {
      best = v;
      worst = k;
    }
  }
  // golden-section refinement on the bracketing interval
  double lo = std::max(0.0, (worst - 1) * h), hi = std::min(radius, (worst + 1) * h);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = min_eig(a), fb = min_eig(b);
  for (int it = 0; it < 60; ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = min_eig(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = min_eig(b);
    }
  }
  return std::min({best, fa, fb});
}

}  // namespace mfglab
