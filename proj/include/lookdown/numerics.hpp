#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace lookdown {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SamplerFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adaptive Gauss-Kronrod on a smooth integrand.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-13) {
  if (b <= a) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol);
}

// Integral of h(y) * y^p * (1-y)^q over (0,1). Endpoint singularities are
// absorbed by the double-exponential rule; the upper half is integrated in
// s = 1-y so that (1-y) stays exact. Extra breakpoints isolate sharp features.
template <class F>
double weighted_unit_integral(F&& h, double p, double q, std::vector<double> breaks = {},
                              double tol = 1e-14) {
  thread_local boost::math::quadrature::tanh_sinh<double> ts(15);
  breaks.push_back(0.0);
  breaks.push_back(0.5);
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double lo = breaks[k], hi = breaks[k + 1];
    if (hi <= lo || lo < 0.0 || hi > 1.0) continue;
    if (hi <= 0.5) {
      auto g = [&](double y) { return h(y) * std::pow(y, p) * std::pow(1.0 - y, q); };
      total += ts.integrate(g, lo, hi, tol);
    } else {
      auto g = [&](double s) {
        const double y = 1.0 - s;
        return h(y) * std::pow(y, p) * std::pow(s, q);
      };
      total += ts.integrate(g, 1.0 - hi, 1.0 - lo, tol);
    }
  }
  return total;
}

class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(std::initializer_list<double> c) : c_(c) {}
  explicit Polynomial(std::vector<double> c) : c_(std::move(c)) {}

  const std::vector<double>& coeffs() const { return c_; }
  std::size_t degree() const { return c_.empty() ? 0 : c_.size() - 1; }

  double operator()(double x) const {
    double v = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) v = v * x + *it;
    return v;
  }

  Polynomial derivative() const {
    if (c_.size() <= 1) return Polynomial{0.0};
    std::vector<double> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
    return Polynomial(std::move(d));
  }

  // Coefficients of d -> p(x0 + d).
  std::vector<double> taylor_at(double x0) const {
    std::vector<double> a = c_;
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = n - 1; k > i; --k) a[k - 1] += x0 * a[k];
    return a;
  }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.c_.empty() || b.c_.empty()) return Polynomial{0.0};
    std::vector<double> r(a.c_.size() + b.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
    return Polynomial(std::move(r));
  }
  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> r(std::max(a.c_.size(), b.c_.size()), 0.0);
    for (std::size_t i = 0; i < a.c_.size(); ++i) r[i] += a.c_[i];
    for (std::size_t i = 0; i < b.c_.size(); ++i) r[i] += b.c_[i];
    return Polynomial(std::move(r));
  }
  friend Polynomial operator*(double s, const Polynomial& a) {
    std::vector<double> r = a.c_;
    for (auto& v : r) v *= s;
    return Polynomial(std::move(r));
  }

 private:
  std::vector<double> c_;
};

// Value with exact first and second x-derivatives.
struct Jet {
  double v = 0.0, d1 = 0.0, d2 = 0.0;

  friend Jet operator+(Jet a, const Jet& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
  friend Jet operator-(Jet a, const Jet& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
  friend Jet operator*(const Jet& a, const Jet& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
  }
  friend Jet operator*(double s, const Jet& a) { return {s * a.v, s * a.d1, s * a.d2}; }
  Jet& operator+=(const Jet& b) { return *this = *this + b; }

  static Jet constant(double c) { return {c, 0.0, 0.0}; }
  static Jet variable(double x) { return {x, 1.0, 0.0}; }
};

inline Jet jet_of(const Polynomial& p, double x) {
  const Polynomial d1 = p.derivative();
  return {p(x), d1(x), d1.derivative()(x)};
}

using Matrix = std::vector<std::vector<double>>;

// exp(tQ) for a conservative rate matrix by uniformization.
inline Matrix expm_generator(const Matrix& Q, double t, double tol = 1e-15) {
  const std::size_t n = Q.size();
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) q = std::max(q, -Q[i][i]);
  Matrix out(n, std::vector<double>(n, 0.0));
  if (q == 0.0 || t == 0.0) {
    for (std::size_t i = 0; i < n; ++i) out[i][i] = 1.0;
    return out;
  }
  // Jump chain P = I + Q/q; sum Poisson(qt)-weighted powers.
  Matrix P(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) P[i][j] = (i == j ? 1.0 : 0.0) + Q[i][j] / q;
  const double lam = q * t;
  // Scaling and squaring keeps the Poisson weights from underflowing.
  int squarings = 0;
  double lam_s = lam;
  while (lam_s > 8.0) {
    lam_s *= 0.5;
    ++squarings;
  }
  Matrix power(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) power[i][i] = 1.0;
  double w = std::exp(-lam_s);
  double mass = 0.0;
  for (int k = 0; mass < 1.0 - tol && k < 1000; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i][j] += w * power[i][j];
    mass += w;
    Matrix next(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l)
        if (power[i][l] != 0.0)
          for (std::size_t j = 0; j < n; ++j) next[i][j] += power[i][l] * P[l][j];
    power.swap(next);
    w *= lam_s / (k + 1);
  }
  for (int s = 0; s < squarings; ++s) {
    Matrix sq(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l)
        for (std::size_t j = 0; j < n; ++j) sq[i][j] += out[i][l] * out[l][j];
    out.swap(sq);
  }
  return out;
}

inline std::vector<double> mat_vec(const Matrix& A, const std::vector<double>& v) {
  std::vector<double> r(A.size(), 0.0);
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) r[i] += A[i][j] * v[j];
  return r;
}

}  // namespace lookdown
