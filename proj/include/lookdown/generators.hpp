#pragma once

#include "measures.hpp"
#include "numerics.hpp"
#include "random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace lookdown {

// Test function on [0,1]; polynomial so that jump integrands are exact.
struct TestFn {
  std::string id;
  Polynomial p;

  double operator()(double x) const { return p(x); }
  Jet jet(double x) const { return jet_of(p, x); }

  // Derivatives against central differences on an 11-point grid.
  bool self_test(double tol = 1e-6) const {
    const double h = 1e-4;
    for (int i = 0; i <= 10; ++i) {
      const double x = std::clamp(0.1 * i, h, 1.0 - h);
      const Jet j = jet(x);
      const double d1 = (p(x + h) - p(x - h)) / (2.0 * h);
      const double d2 = (p(x + h) - 2.0 * p(x) + p(x - h)) / (h * h);
      if (std::abs(d1 - j.d1) > tol * (1.0 + std::abs(j.d1))) return false;
      if (std::abs(d2 - j.d2) > 1e3 * tol * (1.0 + std::abs(j.d2))) return false;
    }
    return true;
  }
};

// Degree <= 4 polynomials used by the operator-identity checks.
inline std::vector<TestFn> default_poly_family() {
  return {{"one", Polynomial{1.0}},
          {"x", Polynomial{0.0, 1.0}},
          {"x^2", Polynomial{0.0, 0.0, 1.0}},
          {"x(1-x)", Polynomial{0.0, 1.0, -1.0}},
          {"x^3-x/2", Polynomial{0.0, -0.5, 0.0, 1.0}},
          {"quartic", Polynomial{0.3, -1.0, 2.0, 0.5, -1.5}}};
}

inline std::vector<double> interior_grid() {
  std::vector<double> xs;
  for (int i = 1; i <= 9; ++i) xs.push_back(0.1 * i);
  return xs;
}

namespace detail {

// Integral over nu of w(y) * sum_m e[m] y^m, times y^2 folded in by the caller's
// choice of exponents: returns int y^2 * weight(y) * sum e[m] y^m nu(dy).
template <class W>
double nu_poly(const NuSpec& nu, const std::vector<double>& e, W&& weight) {
  if (nu.is_null() || e.empty()) return 0.0;
  const auto h = [&](double y) {
    double s = 0.0;
    for (auto it = e.rbegin(); it != e.rend(); ++it) s = s * y + *it;
    return weight(y) * s;
  };
  return nu.integrate_y2(h);
}

// Both-sided combination x*[f(x+y(1-x)) - f(x)] + (1-x)*[f(x-xy) - f(x)]
// expanded as y^2 * sum_{m>=0} e[m] y^m.
inline std::vector<double> two_sided(const Polynomial& f, double x) {
  const auto a = f.taylor_at(x);
  std::vector<double> e;
  for (std::size_t k = 2; k < a.size(); ++k) {
    const double ck = x * std::pow(1.0 - x, double(k)) + (1.0 - x) * std::pow(-x, double(k));
    e.push_back(a[k] * ck);
  }
  return e;
}

// [f(x+y(1-x)) - f(x)] + [f(x-xy) - f(x)] written as y * sum_{m>=0} e[m] y^m.
inline std::vector<double> symmetric_sum(const Polynomial& f, double x) {
  const auto a = f.taylor_at(x);
  std::vector<double> e;
  for (std::size_t k = 1; k < a.size(); ++k)
    e.push_back(a[k] * (std::pow(1.0 - x, double(k)) + std::pow(-x, double(k))));
  return e;
}

// f(x+y(1-x)) - f(x) written as y * sum_{m>=0} e[m] y^m.
inline std::vector<double> upward(const Polynomial& f, double x) {
  const auto a = f.taylor_at(x);
  std::vector<double> e;
  for (std::size_t k = 1; k < a.size(); ++k) e.push_back(a[k] * std::pow(1.0 - x, double(k)));
  return e;
}

inline void check_unit(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("x must lie in [0,1]");
}

}  // namespace detail

inline double apply_G(const TestFn& f, double x, const LambdaSpec& spec) {
  detail::check_unit(x);
  const Jet j = f.jet(x);
  const double diff = 0.5 * spec.c * x * (1.0 - x) * j.d2;
  return diff + detail::nu_poly(spec.nu, detail::two_sided(f.p, x), [](double) { return 1.0; });
}

struct OperatorPair {
  double first = 0.0;   // immigration part (G0 or I0)
  double second = 0.0;  // reproduction part (G1 or I1)
  double sum() const { return first + second; }
};

inline OperatorPair apply_G0_G1(const TestFn& f, double x, const LambdaSpec& spec) {
  detail::check_unit(x);
  const Jet j = f.jet(x);
  OperatorPair r;
  // y(1-y) nu(dy) against y * sum e y^m: the y^2 is folded into integrate_y2.
  r.first = spec.c * (1.0 - 2.0 * x) * j.d1 +
            detail::nu_poly(spec.nu, detail::symmetric_sum(f.p, x), [](double y) { return 1.0 - y; });
  r.second = 0.5 * spec.c * x * (1.0 - x) * j.d2 +
             detail::nu_poly(spec.nu, detail::two_sided(f.p, x), [](double y) { return (1.0 - y) * (1.0 - y); });
  return r;
}

inline OperatorPair apply_I0_I1(const TestFn& f, double x, const LambdaSpec& spec) {
  detail::check_unit(x);
  const Jet j = f.jet(x);
  OperatorPair r;
  r.first = spec.c * (1.0 - x) * j.d1 +
            detail::nu_poly(spec.nu, detail::upward(f.p, x), [](double) { return 1.0; });
  r.second = 0.5 * spec.c * x * (1.0 - x) * j.d2 +
             detail::nu_poly(spec.nu, detail::two_sided(f.p, x), [](double y) { return 1.0 - y; });
  return r;
}

// (G(H f) + dH/dt f) / H with H(t,x) = x(1-x) e^{r_2 t} (K=2) or x (K=1).
inline double apply_Gh_via_H(const TestFn& f, double x, double t, int K, const LambdaSpec& spec) {
  detail::check_unit(x);
  Polynomial shape;
  double rate = 0.0;
  if (K == 2) {
    shape = Polynomial{0.0, 1.0, -1.0};
    rate = pushing_rate(spec, 2);
  } else if (K == 1) {
    shape = Polynomial{0.0, 1.0};
    rate = pushing_rate(spec, 1);
  } else {
    throw DomainError("K must be 1 or 2");
  }
  const double scale = std::exp(rate * t);
  const double H = scale * shape(x);
  if (!(H > 0.0)) throw DomainError("H vanishes at this point");
  const TestFn hf{"H*f", scale * (shape * f.p)};
  const double dtH = rate * H;
  return (apply_G(hf, x, spec) + dtH * f(x)) / H;
}

enum class WfKind { PlainG, G0G1, I0I1 };

// Split of one unit of nu-mass at frequency y between the two parts of an
// h-transformed generator; the discarded share is what the transform removes.
struct JumpBookkeeping {
  double immigration = 0.0;
  double reproduction = 0.0;
  double discarded = 0.0;
  double total() const { return immigration + reproduction + discarded; }
};

inline JumpBookkeeping wf_bookkeeping(WfKind kind, double y) {
  switch (kind) {
    case WfKind::PlainG:
      return {0.0, 1.0, 0.0};
    case WfKind::G0G1:
      return {2.0 * y * (1.0 - y), (1.0 - y) * (1.0 - y), y * y};
    case WfKind::I0I1:
      return {y, 1.0 - y, 0.0};
  }
  return {};
}

inline double wf_atom_rate(WfKind kind, double y, double w) {
  const auto b = wf_bookkeeping(kind, y);
  return w * (b.immigration + b.reproduction);
}

// Probability that a jump of frequency y at state x is upward.
inline double wf_up_probability(WfKind kind, double y, double x) {
  switch (kind) {
    case WfKind::PlainG:
      return x;
    case WfKind::G0G1:
      // up: y(1-y) + (1-y)^2 x, down: y(1-y) + (1-y)^2 (1-x)
      return (y + (1.0 - y) * x) / (1.0 + y);
    case WfKind::I0I1:
      // up: y + (1-y) x, down: (1-y)(1-x)
      return y + (1.0 - y) * x;
  }
  return 0.0;
}

inline double wf_drift(WfKind kind, double c, double x) {
  switch (kind) {
    case WfKind::PlainG:
      return 0.0;
    case WfKind::G0G1:
      return c * (1.0 - 2.0 * x);
    case WfKind::I0I1:
      return c * (1.0 - x);
  }
  return 0.0;
}

// Euler-Maruyama for the diffusion part, exact Poisson timing for jumps.
// Returns X at each sample time.
inline std::vector<double> simulate_wf_immigration(WfKind kind, const LambdaSpec& spec, double x0,
                                                   const std::vector<double>& sample_times, double dt,
                                                   Rng& g) {
  detail::check_unit(x0);
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (spec.nu.kind == NuKind::Beta)
    throw ConfigError("weighted jump measure has infinite mass for the Beta family; simulation needs atoms");
  std::vector<double> atom_rate;
  double total = 0.0;
  for (const auto& a : spec.nu.atoms) total += atom_rate.emplace_back(wf_atom_rate(kind, a.x, a.w));
  std::vector<double> times = sample_times;
  std::sort(times.begin(), times.end());
  std::vector<double> out;
  double x = x0, t = 0.0;
  double next_jump = total > 0.0 ? exponential(g, total) : INFINITY;
  const auto euler = [&](double h) {
    const double noise = std::sqrt(std::max(0.0, spec.c * x * (1.0 - x)) * h) * normal(g);
    x = std::clamp(x + wf_drift(kind, spec.c, x) * h + noise, 0.0, 1.0);
  };
  for (double ts : times) {
    while (t < ts) {
      const double stop = std::min({t + dt, ts, next_jump});
      euler(stop - t);
      t = stop;
      if (t == next_jump) {
        double u = uniform01(g) * total;
        std::size_t k = 0;
        while (k + 1 < atom_rate.size() && u > atom_rate[k]) u -= atom_rate[k++];
        const double y = spec.nu.atoms[k].x;
        x = bernoulli(g, wf_up_probability(kind, y, x)) ? x * (1.0 - y) + y : x * (1.0 - y);
        next_jump = t + exponential(g, total);
      }
    }
    out.push_back(x);
  }
  return out;
}

inline double apply_wf_kind(WfKind kind, const TestFn& f, double x, const LambdaSpec& spec) {
  switch (kind) {
    case WfKind::PlainG:
      return apply_G(f, x, spec);
    case WfKind::G0G1:
      return apply_G0_G1(f, x, spec).sum();
    case WfKind::I0I1:
      return apply_I0_I1(f, x, spec).sum();
  }
  return 0.0;
}

// E[X_t] in closed form: each operator maps x to an affine function a + s x.
inline double wf_linear_mean(WfKind kind, const LambdaSpec& spec, double x0, double t) {
  const TestFn id{"x", Polynomial{0.0, 1.0}};
  const double a = apply_wf_kind(kind, id, 0.0, spec);
  const double s = apply_wf_kind(kind, id, 1.0, spec) - a;
  if (std::abs(s) < 1e-14) return x0 + a * t;
  return (x0 + a / s) * std::exp(s * t) - a / s;
}

// f(x, l) for levels l = 1..L given explicitly, then a(x) + l b(x) beyond L.
struct TwoVarTestFn {
  std::string id;
  std::vector<Polynomial> levels;
  Polynomial tail_const{0.0};
  Polynomial tail_slope{0.0};
  bool tail_declared = true;
  double at_infinity = 0.0;  // f(., infinity), used at x = 0

  long L() const { return static_cast<long>(levels.size()); }

  Jet at(double x, long l) const {
    if (l <= L()) return jet_of(levels[l - 1], x);
    return jet_of(tail_const, x) + static_cast<double>(l) * jet_of(tail_slope, x);
  }
};

inline std::vector<TwoVarTestFn> default_two_var_family() {
  std::vector<TwoVarTestFn> fs;
  fs.push_back({"one", {}, Polynomial{1.0}, Polynomial{0.0}, true, 1.0});
  fs.push_back({"x", {}, Polynomial{0.0, 1.0}, Polynomial{0.0}, true, 0.0});
  fs.push_back({"x^2 at level 1", {Polynomial{0.0, 0.0, 1.0}}, Polynomial{0.0}, Polynomial{0.0}, true, 0.0});
  fs.push_back({"level", {}, Polynomial{0.0}, Polynomial{1.0}, true, 0.0});
  fs.push_back({"x times level", {}, Polynomial{0.0}, Polynomial{0.0, 1.0}, true, 0.0});
  fs.push_back({"mixed levels",
                {Polynomial{0.0, 1.0, -1.0}, Polynomial{1.0, 0.0, 0.0, 2.0}, Polynomial{0.5}},
                Polynomial{0.2, 0.0, 1.0},
                Polynomial{0.0, -0.3},
                true,
                0.0});
  return fs;
}

namespace detail {

inline Jet jet_pow(const Jet& q, long n) {
  if (n == 0) return Jet::constant(1.0);
  const double nd = static_cast<double>(n);
  const double p2 = n >= 2 ? std::pow(q.v, nd - 2.0) : 0.0;
  const double p1 = std::pow(q.v, nd - 1.0);
  return {std::pow(q.v, nd), nd * p1 * q.d1, nd * (nd - 1.0) * p2 * q.d1 * q.d1 + nd * p1 * q.d2};
}

inline Jet jet_inv(const Jet& a) {
  const double v = 1.0 / a.v;
  return {v, -a.d1 * v * v, 2.0 * a.d1 * a.d1 * v * v * v - a.d2 * v * v};
}

// sum_{l>L} l^m (1-x)^{l-1} x for m = 0, 1, 2 as jets in x.
inline std::vector<Jet> geometric_tail_moments(double x, long L) {
  const Jet X = Jet::variable(x);
  const Jet q = Jet::constant(1.0) - X;
  const Jet qL = jet_pow(q, L);
  const Jet invx = jet_inv(X);
  const double Ld = static_cast<double>(L);
  const Jet m1 = Jet::constant(Ld) + invx;  // E[L + G']
  // E[(L+G')^2] = L^2 + 2L/x + (2-x)/x^2
  const Jet m2 = Jet::constant(Ld * Ld) + (2.0 * Ld) * invx + (Jet::constant(2.0) - X) * invx * invx;
  return {qL, qL * m1, qL * m2};
}

}  // namespace detail

inline Jet khat_jet(const TwoVarTestFn& f, double x) {
  if (!f.tail_declared) throw ConfigError("two-variable test function must declare its level tail");
  if (!(x > 0.0 && x <= 1.0)) throw DomainError("jets of the kernel need x in (0,1]");
  const Jet X = Jet::variable(x);
  const Jet q = Jet::constant(1.0) - X;
  Jet sum;
  for (long l = 1; l <= f.L(); ++l) sum += detail::jet_pow(q, l - 1) * X * f.at(x, l);
  const auto mom = detail::geometric_tail_moments(x, f.L());
  sum += mom[0] * jet_of(f.tail_const, x) + mom[1] * jet_of(f.tail_slope, x);
  return sum;
}

inline double khat_apply(const TwoVarTestFn& f, double x) {
  detail::check_unit(x);
  if (!f.tail_declared) throw ConfigError("two-variable test function must declare its level tail");
  if (x == 0.0) return f.at_infinity;
  return khat_jet(f, x).v;
}

// Kernel weight of level l at x.
inline double khat_kernel(double x, long l) { return std::pow(1.0 - x, double(l - 1)) * x; }

inline double ghat_apply(const TwoVarTestFn& f, double x, long l, double c) {
  detail::check_unit(x);
  if (l == std::numeric_limits<long>::max()) return 0.0;
  const Jet j = f.at(x, l);
  const double ld = static_cast<double>(l);
  return 0.5 * c * x * (1.0 - x) * j.d2 + c * ((1.0 - x) - (ld - 1.0) * x) * j.d1 +
         c * ld * (ld - 1.0) / 2.0 * (f.at(x, l + 1).v - j.v);
}

// K-hat applied to G-hat f, with the tail summed in closed form.
inline double khat_ghat(const TwoVarTestFn& f, double x, double c) {
  if (!f.tail_declared) throw ConfigError("two-variable test function must declare its level tail");
  const long L = f.L();
  double s = 0.0;
  // levels 1..L need f at L+1, which lies in the tail
  for (long l = 1; l <= L; ++l) s += khat_kernel(x, l) * ghat_apply(f, x, l, c);
  // Beyond L: f = a + l b, so G-hat f = g0 + l g1 + l^2 g2.
  const Jet a = jet_of(f.tail_const, x), b = jet_of(f.tail_slope, x);
  const double diff = 0.5 * c * x * (1.0 - x);
  // drift c[(1-x) - (l-1)x] = c(1) - c x l
  const double g0 = diff * a.d2 + c * a.d1;
  const double g1 = diff * b.d2 + c * b.d1 - c * x * a.d1 - 0.5 * c * b.v;
  const double g2 = -c * x * b.d1 + 0.5 * c * b.v;
  const auto mom = detail::geometric_tail_moments(x, L);
  return s + g0 * mom[0].v + g1 * mom[1].v + g2 * mom[2].v;
}

// |K-hat G-hat f - G K-hat f| for the Wright-Fisher generator (nu = 0).
inline double intertwining_residual(const TwoVarTestFn& f, double x, double c) {
  if (!(x > 0.0 && x < 1.0)) throw DomainError("residual is evaluated on (0,1)");
  const Jet k = khat_jet(f, x);
  const double rhs = 0.5 * c * x * (1.0 - x) * k.d2;
  return std::abs(khat_ghat(f, x, c) - rhs);
}

struct DecompositionSample {
  double R = 0.0;
  long L1 = 0;  // kOverCap-style sentinel -1 for infinity
};

// Three-stage construction of (R_t, L1_t) for the Wright-Fisher case. The
// level is a pure-birth chain with quadratic rates and explodes in finite
// time; once it passes level_cap, L1 = -1 (infinite) and R is left where it was.
inline DecompositionSample pathwise_decomposition_sim(double c, double x0, double horizon, double dt, Rng& g,
                                                      long level_cap = 1000000) {
  detail::check_unit(x0);
  DecompositionSample s;
  if (x0 == 0.0) {
    s.L1 = -1;
    return s;
  }
  long l = 1;
  if (x0 < 1.0) {
    const double extra = std::floor(std::log(uniform01(g)) / std::log1p(-x0));
    l = extra >= static_cast<double>(level_cap) ? level_cap + 1 : l + static_cast<long>(extra);
  }
  double x = x0, t = 0.0;
  s.R = x0;
  s.L1 = -1;
  if (l > level_cap) return s;
  double next = (l > 1 && c > 0.0) ? exponential(g, c * l * (l - 1) / 2.0) : INFINITY;
  while (t < horizon) {
    const double stop = std::min({t + dt, horizon, next});
    const double h = stop - t;
    const double drift = c * ((1.0 - x) - static_cast<double>(l - 1) * x);
    x = std::clamp(x + drift * h + std::sqrt(std::max(0.0, c * x * (1.0 - x)) * h) * normal(g), 0.0, 1.0);
    t = stop;
    if (t == next) {
      if (++l > level_cap) {
        s.R = x;
        return s;
      }
      next = t + exponential(g, c * l * (l - 1) / 2.0);
    }
  }
  s.R = x;
  s.L1 = l;
  return s;
}

}  // namespace lookdown
