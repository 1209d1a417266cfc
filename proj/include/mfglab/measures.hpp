#pragma once

#include "mfglab/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace mfglab {

/// Uniform average of m Dirac masses in R^d. Points are stored flattened.
class EmpiricalMeasure {
 public:
  /// Throws InvalidInput on d < 1, an empty or ragged configuration, or
  /// non-finite coordinates.
  EmpiricalMeasure(Vec points, int dimension);
  static EmpiricalMeasure from_points(const std::vector<Vec>& points);
  static EmpiricalMeasure from_json(const nlohmann::json& points, int dimension);

  int m() const { return static_cast<int>(q_.size()) / d_; }
  int dimension() const { return d_; }
  const Vec& config() const { return q_; }
  Vec point(int i) const { return q_.segment(i * d_, d_); }

  nlohmann::json to_json() const;
  /// Rows "index,x0,x1,..." with a header line.
  std::string to_csv() const;

 private:
  Vec q_;
  int d_;
};

struct Coupling {
  /// perm[i] is the index of the target point paired with source point i.
  std::vector<int> perm;
  double cost = 0.0;
};

struct Transport {
  double distance = 0.0;
  Coupling coupling;
};

enum class TransportSolver { Automatic, Sorting, Exhaustive, Assignment };

/// Exact W2 between equal-size empirical measures. Automatic picks sorting
/// for d = 1, exhaustive search for m <= 8 and the Hungarian solver above.
Transport w2_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                      TransportSolver solver = TransportSolver::Automatic);

/// (1/m) sum |q_i - b_perm(i)|^2, accumulated in index order.
double coupling_cost(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                     const std::vector<int>& perm);

EmpiricalMeasure displacement_interpolate(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                          double t);

struct WeightedMeasure {
  Vec points;
  std::vector<double> weights;
  int dimension = 1;

  int size() const { return static_cast<int>(weights.size()); }
  Vec point(int i) const { return points.segment(i * dimension, dimension); }
  /// Throws InvalidInput if weights are negative or do not sum to one.
  void validate() const;
  static WeightedMeasure uniform(const EmpiricalMeasure& mu);
};

WeightedMeasure classical_interpolate(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                      double t);

double second_moment(const EmpiricalMeasure& mu);
double second_moment(const WeightedMeasure& mu);

}  // namespace mfglab
