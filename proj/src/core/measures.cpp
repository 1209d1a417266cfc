#include "mfglab/measures.hpp"

#include "mfglab/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mfglab {

EmpiricalMeasure::EmpiricalMeasure(Vec points, int dimension)
    : q_(std::move(points)), d_(dimension) {
  if (d_ < 1) throw InvalidInput("dimension must be positive");
  if (q_.size() == 0 || q_.size() % d_ != 0)
    throw InvalidInput("configuration size must be a positive multiple of the dimension");
  if (!q_.allFinite()) throw InvalidInput("measure points must be finite");
}

EmpiricalMeasure EmpiricalMeasure::from_points(const std::vector<Vec>& points) {
  if (points.empty()) throw InvalidInput("empty measure");
  const auto d = points.front().size();
  Vec q(static_cast<Eigen::Index>(points.size()) * d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) throw InvalidInput("points of mixed dimension");
    q.segment(static_cast<Eigen::Index>(i) * d, d) = points[i];
  }
  return EmpiricalMeasure(q, static_cast<int>(d));
}

EmpiricalMeasure EmpiricalMeasure::from_json(const nlohmann::json& points, int dimension) {
  if (!points.is_array() || points.empty()) throw ConfigError("measure must be a non-empty array");
  Vec q(static_cast<Eigen::Index>(points.size()) * dimension);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.is_number() && dimension == 1) {
      q(static_cast<Eigen::Index>(i)) = p.get<double>();
      continue;
    }
    if (!p.is_array() || p.size() != static_cast<std::size_t>(dimension))
      throw ConfigError("measure point has wrong dimension");
    for (int k = 0; k < dimension; ++k) {
      if (!p[k].is_number()) throw ConfigError("measure coordinates must be numbers");
      q(static_cast<Eigen::Index>(i) * dimension + k) = p[k].get<double>();
    }
  }
  try {
    return EmpiricalMeasure(q, dimension);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json EmpiricalMeasure::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < m(); ++i) {
    nlohmann::json p = nlohmann::json::array();
    for (int k = 0; k < d_; ++k) p.push_back(q_(i * d_ + k));
    out.push_back(p);
  }
  return out;
}

std::string EmpiricalMeasure::to_csv() const {
  std::string out = "index";
  for (int k = 0; k < d_; ++k) out += fmt::format(",x{}", k);
  out += "\r\n";
  for (int i = 0; i < m(); ++i) {
    out += fmt::format("{}", i);
    for (int k = 0; k < d_; ++k) out += fmt::format(",{:.17g}", q_(i * d_ + k));
    out += "\r\n";
  }
  return out;
}

namespace {

void require_same_shape(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dimension() != nu.dimension()) throw InvalidInput("measures of different dimension");
  if (mu.m() != nu.m()) throw InvalidInput("measures with different particle counts");
}

Mat cost_matrix(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const int m = mu.m();
  Mat c(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) c(i, j) = (mu.point(i) - nu.point(j)).squaredNorm();
  return c;
}

std::vector<int> sorting_plan(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const int m = mu.m();
  std::vector<int> a(m), b(m), perm(m);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  const Vec& x = mu.config();
  const Vec& y = nu.config();
  std::stable_sort(a.begin(), a.end(), [&](int i, int j) { return x(i) < x(j); });
  std::stable_sort(b.begin(), b.end(), [&](int i, int j) { return y(i) < y(j); });
  for (int k = 0; k < m; ++k) perm[a[k]] = b[k];
  return perm;
}

std::vector<int> exhaustive_plan(const Mat& c) {
  const int m = static_cast<int>(c.rows());
  std::vector<int> perm(m), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  // next_permutation enumerates in lexicographic order, so the strict
  // comparison keeps the lexicographically smallest optimum
  do {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += c(i, perm[i]);
    if (s < best_cost) {
      best_cost = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Shortest augmenting path Hungarian algorithm with potentials, O(m^3).
std::vector<int> assignment_plan(const Mat& c) {
  const int m = static_cast<int>(c.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= m; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(m);
  for (int j = 1; j <= m; ++j) perm[match[j] - 1] = j - 1;
  return perm;
}

}  // namespace

double coupling_cost(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                     const std::vector<int>& perm) {
  require_same_shape(mu, nu);
  if (perm.size() != static_cast<std::size_t>(mu.m())) throw InvalidInput("permutation size mismatch");
  double s = 0.0;
  for (int i = 0; i < mu.m(); ++i) s += (mu.point(i) - nu.point(perm[i])).squaredNorm();
  return s / mu.m();
}

Transport w2_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                      TransportSolver solver) {
  require_same_shape(mu, nu);
  if (solver == TransportSolver::Automatic) {
    if (mu.dimension() == 1)
      solver = TransportSolver::Sorting;
    else if (mu.m() <= 8)
      solver = TransportSolver::Exhaustive;
    else
      solver = TransportSolver::Assignment;
  }
  Transport out;
  switch (solver) {
    case TransportSolver::Sorting:
      if (mu.dimension() != 1) throw InvalidInput("sorting transport requires d = 1");
      out.coupling.perm = sorting_plan(mu, nu);
      break;
    case TransportSolver::Exhaustive:
      if (mu.m() > 10) throw InvalidInput("exhaustive transport limited to m <= 10");
      out.coupling.perm = exhaustive_plan(cost_matrix(mu, nu));
      break;
    default:
      out.coupling.perm = assignment_plan(cost_matrix(mu, nu));
      break;
  }
  out.coupling.cost = coupling_cost(mu, nu, out.coupling.perm);
  out.distance = std::sqrt(out.coupling.cost);
  return out;
}

EmpiricalMeasure displacement_interpolate(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                          double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("interpolation time must lie in [0,1]");
  const Transport plan = w2_distance(mu, nu);
  if (t == 0.0) return mu;
  if (t == 1.0) return nu;
  const int d = mu.dimension();
  Vec q(mu.config().size());
  for (int i = 0; i < mu.m(); ++i)
    q.segment(i * d, d) = (1.0 - t) * mu.point(i) + t * nu.point(plan.coupling.perm[i]);
  return EmpiricalMeasure(q, d);
}

void WeightedMeasure::validate() const {
  if (dimension < 1 || points.size() != static_cast<Eigen::Index>(weights.size()) * dimension)
    throw InvalidInput("weighted measure shape mismatch");
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidInput("weights must be nonnegative");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-12) throw InvalidInput("weights must sum to one");
}

WeightedMeasure WeightedMeasure::uniform(const EmpiricalMeasure& mu) {
  return {mu.config(), std::vector<double>(mu.m(), 1.0 / mu.m()), mu.dimension()};
}

WeightedMeasure classical_interpolate(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                      double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("interpolation time must lie in [0,1]");
  if (mu.dimension() != nu.dimension()) throw InvalidInput("measures of different dimension");
  if (t == 0.0) return WeightedMeasure::uniform(mu);
  if (t == 1.0) return WeightedMeasure::uniform(nu);
  WeightedMeasure out;
  out.dimension = mu.dimension();
  out.points.resize(mu.config().size() + nu.config().size());
  out.points << mu.config(), nu.config();
  out.weights.assign(mu.m(), (1.0 - t) / mu.m());
  out.weights.insert(out.weights.end(), nu.m(), t / nu.m());
  return out;
}

double second_moment(const EmpiricalMeasure& mu) { return mu.config().squaredNorm() / mu.m(); }

double second_moment(const WeightedMeasure& mu) {
  double s = 0.0;
  for (int i = 0; i < mu.size(); ++i) s += mu.weights[i] * mu.point(i).squaredNorm();
  return s;
}

}  // namespace mfglab
