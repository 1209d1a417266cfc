#pragma once

#include "mfglab/functions.hpp"

namespace mfglab::testing {

class Constant final : public ScalarFunction {
 public:
  explicit Constant(double c) : c_(c) {}
  double value(const Vec&) const override { return c_; }
  Vec gradient(const Vec& x) const override { return Vec::Zero(x.size()); }
  Mat hessian(const Vec& x) const override { return Mat::Zero(x.size(), x.size()); }
  Tensor3 third(const Vec& x) const override { return Tensor3(static_cast<int>(x.size())); }
  double growth_constant(int) const override { return 0.0; }
  double support_radius() const override { return 0.0; }
  nlohmann::json to_json() const override { return {{"name", "constant"}, {"c", c_}}; }

 private:
  double c_;
};

inline FunctionPtr constant(double c) { return std::make_shared<Constant>(c); }

}  // namespace mfglab::testing
