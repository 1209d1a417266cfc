#include "mfglab/types.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace mfglab {

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  assert(other.n_ == n_);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Mat Tensor3::contract(const Vec& v) const {
  Mat out = Mat::Zero(n_, n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      double s = 0.0;
      for (int c = 0; c < n_; ++c) s += (*this)(a, b, c) * v(c);
      out(a, b) = s;
    }
  return out;
}

}  // namespace mfglab
