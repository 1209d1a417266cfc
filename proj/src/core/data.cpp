#include "mfglab/data.hpp"

#include "mfglab/errors.hpp"
#include "mfglab/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <limits>

namespace mfglab {

ConvolutionFunctional::ConvolutionFunctional(FunctionPtr phi, FunctionPtr phi1)
    : phi_(std::move(phi)), phi1_(std::move(phi1)) {
  if (!phi_ || !phi1_) throw InvalidInput("null data function");
}

double ConvolutionFunctional::value(const WeightedMeasure& mu) const {
  mu.validate();
  const int n = mu.size();
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += mu.weights[i] * phi_->value(mu.point(i));
  if (!phi1_->is_zero()) {
    double pair = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        pair += mu.weights[i] * mu.weights[j] * phi1_->value(mu.point(i) - mu.point(j));
    s += 0.5 * pair;
  }
  return s;
}

double ConvolutionFunctional::value(const EmpiricalMeasure& mu) const {
  return restricted(mu.config(), mu.dimension());
}

double ConvolutionFunctional::restricted(const Vec& q, int d) const {
  const int m = static_cast<int>(q.size()) / d;
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += phi_->value(particle(q, i, d));
  s /= m;
  if (!phi1_->is_zero()) {
    // the double sum over ordered pairs, written as the diagonal plus twice
    // the strict upper triangle, so reorderings give identical values
    double pair = m * phi1_->value(Vec::Zero(d));
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        pair += 2.0 * phi1_->value(particle(q, i, d) - particle(q, j, d));
    s += pair / (2.0 * m * m);
  }
  return s;
}

Vec ConvolutionFunctional::restricted_gradient(const Vec& q, int d) const {
  const int m = static_cast<int>(q.size()) / d;
  Vec g(q.size());
  for (int i = 0; i < m; ++i) particle(g, i, d) = phi_->gradient(particle(q, i, d)) / m;
  if (!phi1_->is_zero()) {
    const double w = 1.0 / (static_cast<double>(m) * m);
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) {
        const Vec v = w * phi1_->gradient(particle(q, a, d) - particle(q, b, d));
        particle(g, a, d) += v;
        particle(g, b, d) -= v;
      }
  }
  return g;
}

Mat ConvolutionFunctional::restricted_hessian(const Vec& q, int d) const {
  const int m = static_cast<int>(q.size()) / d;
  Mat h = Mat::Zero(q.size(), q.size());
  for (int i = 0; i < m; ++i) block(h, i, i, d) = phi_->hessian(particle(q, i, d)) / m;
  if (!phi1_->is_zero()) {
    const double w = 1.0 / (static_cast<double>(m) * m);
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) {
        const Mat k = w * phi1_->hessian(particle(q, a, d) - particle(q, b, d));
        block(h, a, a, d) += k;
        block(h, b, b, d) += k;
        block(h, a, b, d) -= k;
        block(h, b, a, d) -= k;
      }
  }
  return h;
}

Tensor3 ConvolutionFunctional::restricted_third(const Vec& q, int d) const {
  const int m = static_cast<int>(q.size()) / d;
  Tensor3 t(m * d);
  for (int i = 0; i < m; ++i) {
    const Tensor3 f = phi_->third(particle(q, i, d));
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c) t(i * d + a, i * d + b, i * d + c) = f(a, b, c) / m;
  }
  if (!phi1_->is_zero()) {
    const double w = 1.0 / (static_cast<double>(m) * m);
    for (int p = 0; p < m; ++p)
      for (int r = p + 1; r < m; ++r) {
        const Tensor3 f = phi1_->third(particle(q, p, d) - particle(q, r, d));
        const int idx[2] = {p, r};
        const double sign[2] = {1.0, -1.0};
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z) {
              const double s = w * sign[x] * sign[y] * sign[z];
              for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                  for (int c = 0; c < d; ++c)
                    t(idx[x] * d + a, idx[y] * d + b, idx[z] * d + c) += s * f(a, b, c);
            }
      }
  }
  return t;
}

double ConvolutionFunctional::pointwise(const Vec& x, const WeightedMeasure& mu) const {
  double s = phi_->value(x);
  if (!phi1_->is_zero())
    for (int i = 0; i < mu.size(); ++i) s += mu.weights[i] * phi1_->value(x - mu.point(i));
  return s;
}

Vec ConvolutionFunctional::pointwise_gradient(const Vec& x, const WeightedMeasure& mu) const {
  Vec g = phi_->gradient(x);
  if (!phi1_->is_zero())
    for (int i = 0; i < mu.size(); ++i) g += mu.weights[i] * phi1_->gradient(x - mu.point(i));
  return g;
}

Mat ConvolutionFunctional::pointwise_hessian(const Vec& x, const WeightedMeasure& mu) const {
  Mat h = phi_->hessian(x);
  if (!phi1_->is_zero())
    for (int i = 0; i < mu.size(); ++i) h += mu.weights[i] * phi1_->hessian(x - mu.point(i));
  return h;
}

Vec ConvolutionFunctional::pointwise_particle_gradient(const Vec& x, const Vec& q, int d) const {
  const int m = static_cast<int>(q.size()) / d;
  Vec g = Vec::Zero(q.size());
  if (!phi1_->is_zero())
    for (int i = 0; i < m; ++i) particle(g, i, d) = -phi1_->gradient(x - particle(q, i, d)) / m;
  return g;
}

DataModel::DataModel(FunctionPtr phi, FunctionPtr phi1, FunctionPtr f_phi, FunctionPtr f_phi1)
    : initial_(std::move(phi), std::move(phi1)), coupling_(std::move(f_phi), std::move(f_phi1)) {}

DataModel DataModel::from_json(const nlohmann::json& spec, int dimension) {
  if (!spec.is_object()) throw ConfigError("data block must be an object");
  auto get = [&](const char* key) {
    return spec.contains(key) ? function_from_json(spec.at(key)) : zero_function();
  };
  DataModel data(get("phi"), get("phi1"), get("f_phi"), get("f_phi1"));
  try {
    data.require_even(dimension);
    if (spec.value("require_convex", false)) data.require_convex(dimension);
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  return data;
}

nlohmann::json DataModel::to_json() const {
  return {{"phi", initial_.phi().to_json()},
          {"phi1", initial_.phi1().to_json()},
          {"f_phi", coupling_.phi().to_json()},
          {"f_phi1", coupling_.phi1().to_json()}};
}

namespace {

double scan_radius(const ScalarFunction& f) {
  const double r = f.support_radius();
  return std::isfinite(r) && r > 0.0 ? r : 10.0;
}

}  // namespace

double DataModel::lambda(int dimension) const {
  return min_hessian_eigenvalue_radial_scan(initial_.phi(), dimension, scan_radius(initial_.phi()));
}

double DataModel::lambda1(int dimension) const {
  if (initial_.phi1().is_zero()) return 0.0;
  return min_hessian_eigenvalue_radial_scan(initial_.phi1(), dimension,
                                            scan_radius(initial_.phi1()));
}

void DataModel::require_even(int dimension, double tol) const {
  Rng rng(0x5eed);
  for (const ConvolutionFunctional* g : {&initial_, &coupling_}) {
    for (int s = 0; s < 32; ++s) {
      const Vec x = uniform_ball(rng, dimension, 3.0);
      if (std::abs(g->phi1().value(x) - g->phi1().value(-x)) > tol)
        throw InvalidInput("interaction kernel is not even");
    }
  }
}

void DataModel::require_convex(int dimension, double tol) const {
  const FunctionPtr total = sum_function(initial_.phi_ptr(), initial_.phi1_ptr());
  const double radius = std::max(scan_radius(initial_.phi()), scan_radius(initial_.phi1()));
  if (min_hessian_eigenvalue_radial_scan(*total, dimension, radius) < -tol)
    throw InvalidInput("D^2 phi + D^2 phi1 is not nonnegative");
}

nlohmann::json Certificate::to_json() const {
  return {{"kind", kind}, {"verdict", verdict}, {"witness", witness}, {"details", details}};
}

Certificate fourier_monotonicity(const ScalarFunction& phi1, int dimension,
                                 const FourierGrid& grid) {
  if (dimension < 1 || dimension > 2) throw InvalidInput("fourier grid supports d in 1..2");
  Certificate c;
  c.kind = "monotonicity";
  if (phi1.is_zero()) {
    c.verdict = true;
    c.witness = 0.0;
    return c;
  }
  const double support = phi1.support_radius();
  if (!std::isfinite(support))
    throw ResolutionError("interaction kernel is not integrable on R^d");
  const int n = grid.points_per_axis > 0 ? grid.points_per_axis : (dimension == 1 ? 256 : 64);
  const double half = grid.box_factor * support;
  const double h = 2.0 * half / n;

  // sample the kernel on the spatial grid x_j = -B + j h
  long total = 1;
  for (int k = 0; k < dimension; ++k) total *= n;
  std::vector<double> values(total);
  double peak = 0.0, rim = 0.0;
  std::vector<int> idx(dimension, 0);
  Vec x(dimension);
  for (long flat = 0; flat < total; ++flat) {
    long r = flat;
    double inf_norm = 0.0;
    for (int k = dimension - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(r % n);
      r /= n;
      x(k) = -half + idx[k] * h;
      inf_norm = std::max(inf_norm, std::abs(x(k)));
    }
    values[flat] = phi1.value(x);
    peak = std::max(peak, std::abs(values[flat]));
    if (inf_norm > 0.9 * half) rim = std::max(rim, std::abs(values[flat]));
  }
  if (rim > 1e-10 * std::max(peak, 1e-300))
    throw ResolutionError("interaction kernel has mass near the truncation boundary");

  // phase factors exp(2 pi i x xi) per axis, xi_k = k / (2B), k in [-n/2, n/2)
  std::vector<std::complex<double>> phase(static_cast<std::size_t>(n) * n);
  for (int f = 0; f < n; ++f) {
    const double xi = (f - n / 2) / (2.0 * half);
    for (int j = 0; j < n; ++j) {
      const double xj = -half + j * h;
      const double arg = 2.0 * M_PI * xj * xi;
      phase[static_cast<std::size_t>(f) * n + j] = {std::cos(arg), std::sin(arg)};
    }
  }
  const double cell = std::pow(h, dimension);
  double minimum = std::numeric_limits<double>::infinity();
  Vec argmin(dimension);
  std::vector<int> fidx(dimension, 0);
  for (long ff = 0; ff < total; ++ff) {
    long r = ff;
    for (int k = dimension - 1; k >= 0; --k) {
      fidx[k] = static_cast<int>(r % n);
      r /= n;
    }
    std::complex<double> acc = 0.0;
    for (long flat = 0; flat < total; ++flat) {
      if (values[flat] == 0.0) continue;
      long s = flat;
      std::complex<double> ph = 1.0;
      for (int k = dimension - 1; k >= 0; --k) {
        const int j = static_cast<int>(s % n);
        s /= n;
        ph *= phase[static_cast<std::size_t>(fidx[k]) * n + j];
      }
      acc += values[flat] * ph;
    }
    const double transform = acc.real() * cell;
    if (transform < minimum) {
      minimum = transform;
      for (int k = 0; k < dimension; ++k) argmin(k) = (fidx[k] - n / 2) / (2.0 * half);
    }
  }
  c.witness = minimum;
  c.verdict = minimum >= -grid.tolerance;
  c.details = {{"points_per_axis", n},
               {"box_half_width", half},
               {"tolerance", grid.tolerance},
               {"argmin", std::vector<double>(argmin.data(), argmin.data() + dimension)}};
  return c;
}

Certificate displacement_modulus(double lambda, double lambda1) {
  Certificate c;
  c.kind = "displacement-convexity";
  c.witness = lambda - 2.0 * std::abs(lambda1);
  c.verdict = c.witness > 0.0;
  c.details = {{"lambda", lambda}, {"lambda1", lambda1}};
  return c;
}

Certificate displacement_modulus(const DataModel& data, int dimension) {
  return displacement_modulus(data.lambda(dimension), data.lambda1(dimension));
}

Mat finite_difference_hessian(const std::function<double(const Vec&)>& f, const Vec& x,
                              double h) {
  const auto n = x.size();
  Mat out(n, n);
  const double f0 = f(x);
  for (Eigen::Index a = 0; a < n; ++a) {
    Vec xp = x, xm = x;
    xp(a) += h;
    xm(a) -= h;
    out(a, a) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
    for (Eigen::Index b = a + 1; b < n; ++b) {
      Vec pp = x, pm = x, mp = x, mm = x;
      pp(a) += h, pp(b) += h;
      pm(a) += h, pm(b) -= h;
      mp(a) -= h, mp(b) += h;
      mm(a) -= h, mm(b) -= h;
      out(a, b) = out(b, a) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return out;
}

ConvexityReport discrete_convexity_check(const std::function<double(const Vec&)>& evaluator,
                                         int m, double lambda, const std::vector<Vec>& samples,
                                         double tol) {
  if (m < 1) throw InvalidInput("particle count must be positive");
  ConvexityReport r;
  r.threshold = lambda / m - tol;
  r.worst_eigenvalue = std::numeric_limits<double>::infinity();
  for (const Vec& q : samples) {
    const Mat h = finite_difference_hessian(evaluator, q, 1e-3);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    const double e = es.eigenvalues().minCoeff();
    r.per_sample.push_back(e);
    r.worst_eigenvalue = std::min(r.worst_eigenvalue, e);
  }
  r.passed = !samples.empty() && r.worst_eigenvalue >= r.threshold;
  return r;
}

FunctionPtr bump_phi1(double inner, double outer) { return bump_function(inner, outer, 1.0); }

}  // namespace mfglab
