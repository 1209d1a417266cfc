#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace mfglab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Particle configurations are flattened: particle i of dimension d occupies
// entries [i*d, (i+1)*d).
inline auto particle(Vec& q, int i, int d) { return q.segment(i * d, d); }
inline auto particle(const Vec& q, int i, int d) { return q.segment(i * d, d); }

inline auto block(Mat& a, int i, int j, int d) { return a.block(i * d, j * d, d, d); }
inline auto block(const Mat& a, int i, int j, int d) {
  return a.block(i * d, j * d, d, d);
}

/// Dense symmetric-in-nothing rank-3 tensor over an n-dimensional space.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n, 0.0) {}

  int dim() const { return n_; }
  double& operator()(int a, int b, int c) { return data_[index(a, b, c)]; }
  double operator()(int a, int b, int c) const { return data_[index(a, b, c)]; }

  double max_abs() const;
  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator*=(double s);

  /// Contract the last index with v: result(a,b) = sum_c T(a,b,c) v(c).
  Mat contract(const Vec& v) const;

 private:
  std::size_t index(int a, int b, int c) const {
    return (static_cast<std::size_t>(a) * n_ + b) * n_ + c;
  }
  int n_ = 0;
  std::vector<double> data_;
};

}  // namespace mfglab
