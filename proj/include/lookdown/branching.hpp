#pragma once

#include "engine.hpp"
#include "measures.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace lookdown {

struct CumulantSolution {
  double lambda = 0.0;
  double step = 0.0;
  int order = 4;
  std::vector<double> t;
  std::vector<double> u;
  double max_residual = 0.0;  // |u(t) + int_0^t psi(u) - lambda| over nodes

  double final() const { return u.back(); }
};

namespace detail {

// int_a^b psi(u(s)) ds from endpoint values and slopes (cubic Hermite rule).
// d/ds psi(u) = psi'(u) u' = -psi'(u) psi(u).
inline double hermite_psi_integral(const BranchingMechanism& bm, double ua, double ub, double h) {
  const double pa = bm.psi(ua), pb = bm.psi(ub);
  const double da = -bm.psi_prime(ua) * pa, db = -bm.psi_prime(ub) * pb;
  return 0.5 * h * (pa + pb) + h * h / 12.0 * (da - db);
}

}  // namespace detail

// Classical RK4 for du/dt = -psi(u), u(0) = lambda, on a uniform grid that
// ends exactly at T.
inline CumulantSolution solve_u(const BranchingMechanism& bm, double lambda, double T, double step,
                                double residual_tol = 1e-8) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
  if (!(step > 0.0)) throw ConfigError("solver step must be positive");
  if (!(T >= 0.0)) throw DomainError("horizon must be nonnegative");
  const long n = std::max(1L, static_cast<long>(std::ceil(T / step - 1e-12)));
  const double h = T / static_cast<double>(n);
  CumulantSolution s;
  s.lambda = lambda;
  s.step = h;
  s.t.reserve(n + 1);
  s.u.reserve(n + 1);
  s.t.push_back(0.0);
  s.u.push_back(lambda);
  const auto f = [&](double u) { return -bm.psi(u); };
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    const double u = s.u.back();
    const double k1 = f(u), k2 = f(u + 0.5 * h * k1), k3 = f(u + 0.5 * h * k2), k4 = f(u + h * k3);
    double next = u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (next < 0.0) next = 0.0;
    acc += detail::hermite_psi_integral(bm, u, next, h);
    s.t.push_back(static_cast<double>(i + 1) * h);
    s.u.push_back(next);
    s.max_residual = std::max(s.max_residual, std::abs(next + acc - lambda));
  }
  if (T == 0.0) s.t.back() = 0.0;
  if (!(s.max_residual < residual_tol))
    throw SolverFailure("cumulant integral-equation residual " + std::to_string(s.max_residual) +
                        " exceeds tolerance");
  return s;
}

inline double default_ode_step(double T) { return std::min(1e-3, std::max(T, 1e-6) / 8.0); }

inline double cb_laplace(double x, double lambda, double t, const BranchingMechanism& bm, double step = 0.0) {
  if (!(x >= 0.0 && lambda >= 0.0 && t >= 0.0)) throw DomainError("Laplace inputs must be nonnegative");
  if (lambda == 0.0) return 1.0;
  const auto s = solve_u(bm, lambda, t, step > 0.0 ? step : default_ode_step(t));
  return std::exp(-x * s.final());
}

inline double cbi_laplace(double x, double lambda, double t, const BranchingMechanism& bm,
                          const SubordinatorExponent& phi, double step = 0.0) {
  if (!(x >= 0.0 && lambda >= 0.0 && t >= 0.0)) throw DomainError("Laplace inputs must be nonnegative");
  if (lambda == 0.0 || t == 0.0) return std::exp(-x * lambda);
  // Composite Simpson needs an even number of intervals.
  const double h0 = step > 0.0 ? step : default_ode_step(t);
  long n = std::max(2L, static_cast<long>(std::ceil(t / h0 - 1e-12)));
  if (n % 2) ++n;
  const auto s = solve_u(bm, lambda, t, t / static_cast<double>(n));
  double integral = phi(s.u.front()) + phi(s.u.back());
  for (long i = 1; i < n; ++i) integral += (i % 2 ? 4.0 : 2.0) * phi(s.u[i]);
  integral *= s.step / 3.0;
  return std::exp(-x * s.final() - integral);
}

inline double mean_normalizer(const BranchingMechanism& bm, double t) {
  return std::exp(-bm.psi_prime_at_zero() * t);
}

inline constexpr double kAbsorptionLevel = 1e-12;

namespace detail {

// One Euler step of size dt. Jumps inside the step are simulated exactly at
// the current mass; the drift and diffusion are applied at the end of the step.
inline double cb_step(const BranchingMechanism& bm, bool immigration, double t0, double dt, double y,
                      Rng& g, std::vector<MassPath::Jump>& jumps) {
  double W = 0.0, UW = 0.0;
  for (const auto& a : bm.nuY) {
    W += a.w;
    UW += a.x * a.w;
  }
  double s = t0;
  const double end = t0 + dt;
  for (;;) {
    const double rate = y * W + (immigration ? UW : 0.0);
    if (!(rate > 0.0)) break;
    s += exponential(g, rate);
    if (s >= end) break;
    double v = uniform01(g) * rate;
    std::size_t k = 0;
    for (; k + 1 < bm.nuY.size(); ++k) {
      const double r = (y + (immigration ? bm.nuY[k].x : 0.0)) * bm.nuY[k].w;
      if (v <= r) break;
      v -= r;
    }
    const double u = bm.nuY[k].x;
    const bool tagged = immigration && bernoulli(g, u / (y + u));
    jumps.push_back({s, u / (y + u), y, u, tagged});
    y += u;
  }
  const double noise = std::sqrt(bm.sigma2 * std::max(y, 0.0) * dt) * normal(g);
  y = y - bm.drift_rate() * y * dt + (immigration ? bm.sigma2 * dt : 0.0) + noise;
  return std::max(y, 0.0);
}

inline MassPath simulate_mass(const BranchingMechanism& bm, bool immigration, double x0, double horizon,
                              double dt, Rng& g) {
  bm.validate();
  if (!(x0 >= 0.0)) throw DomainError("initial mass must be nonnegative");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(horizon >= 0.0)) throw DomainError("horizon must be nonnegative");
  const long n = std::max(1L, static_cast<long>(std::ceil(horizon / dt - 1e-12)));
  const double h = horizon / static_cast<double>(n);
  MassPath p;
  p.sigma2 = bm.sigma2;
  p.tags_level1 = immigration;
  p.t.reserve(n + 1);
  p.Y.reserve(n + 1);
  p.t.push_back(0.0);
  p.Y.push_back(x0);
  if (!immigration && x0 < kAbsorptionLevel) {
    p.Y.back() = 0.0;
    p.absorbed = true;
    p.absorption_time = 0.0;
  }
  double y = p.Y.back();
  for (long i = 0; i < n; ++i) {
    const double t0 = static_cast<double>(i) * h;
    if (!p.absorbed && horizon > 0.0) {
      y = cb_step(bm, immigration, t0, h, y, g, p.jumps);
      if (!immigration && y < kAbsorptionLevel) {
        y = 0.0;
        p.absorbed = true;
        p.absorption_time = t0 + h;
      }
    }
    p.t.push_back(static_cast<double>(i + 1) * h);
    p.Y.push_back(y);
  }
  return p;
}

}  // namespace detail

inline MassPath simulate_cb(const BranchingMechanism& bm, double x0, double horizon, double dt, Rng& g) {
  return detail::simulate_mass(bm, false, x0, horizon, dt, g);
}

// CBI(psi, phi_tilde): immigration drift sigma^2 and jumps u at rate u w.
inline MassPath simulate_cbi(const BranchingMechanism& bm, double x0, double horizon, double dt, Rng& g) {
  return detail::simulate_mass(bm, true, x0, horizon, dt, g);
}

inline double tagged_sum(const MassPath& p, double upto = INFINITY) {
  double s = 0.0;
  for (const auto& j : p.jumps)
    if (j.tagged && j.time <= upto) s += j.size;
  return s;
}

inline void write_mass_path_csv(std::ostream& os, const MassPath& p) {
  os << "time,Y,jump_size,tagged\n";
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.t.size(); ++i) {
    while (k < p.jumps.size() && p.jumps[k].time <= p.t[i]) {
      const auto& j = p.jumps[k++];
      os << j.time << ',' << j.y_minus + j.size << ',' << j.size << ',' << (j.tagged ? 1 : 0) << '\n';
    }
    os << p.t[i] << ',' << p.Y[i] << ",0,0\n";
  }
}

struct BranchingRunOptions {
  std::uint64_t seed = 1;
  std::size_t replicas = 10000;
  double dt = 1e-3;
  unsigned workers = 1;
  double sigmas = 3.0;
};

inline std::string lambda_tag(double l) {
  std::string s = std::to_string(l);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return "lambda=" + s;
}

// Three-way check of the size-biased CB against the CBI with phi_tilde.
inline TestReport size_bias_check(const BranchingMechanism& bm, double x0, double t,
                                  const std::vector<double>& lambdas, const BranchingRunOptions& opt) {
  if (!(x0 > 0.0)) throw DomainError("size-biasing needs positive initial mass");
  const SubordinatorExponent phi = phi_tilde(bm);
  const double inv_m = 1.0 / mean_normalizer(bm, t);
  const auto cb_final = parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, 2 * r);
    return simulate_cb(bm, x0, t, opt.dt, g).Y.back();
  });
  const auto cbi_final = parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, 2 * r + 1);
    return simulate_cbi(bm, x0, t, opt.dt, g).Y.back();
  });
  TestReport rep;
  rep.experiment = "size-bias";
  for (double l : lambdas) {
    Accumulator a, b;
    for (double y : cb_final) a.add(std::exp(-l * y) * y / x0 * inv_m);
    for (double y : cbi_final) b.add(std::exp(-l * y));
    const MCEstimate ea = a.estimate(), eb = b.estimate();
    const double c = cbi_laplace(x0, l, t, bm, phi);
    const std::string tag = lambda_tag(l);
    rep.add("size-biased CB " + tag, ea);
    rep.add("CBI simulation " + tag, eb);
    rep.add("CBI analytic " + tag, c);
    const std::string st = "size-biased-cb-is-cbi-with-phi-tilde";
    rep.verdicts.push_back(within_sigma("size-biased CB vs CBI simulation " + tag, ea, eb, opt.sigmas, st));
    rep.verdicts.push_back(within_sigma("size-biased CB vs analytic " + tag, ea, c, opt.sigmas, st));
    rep.verdicts.push_back(within_sigma("CBI simulation vs analytic " + tag, eb, c, opt.sigmas, st));
  }
  return rep;
}

inline double tagged_exponent(const BranchingMechanism& bm, double lambda) {
  double s = 0.0;
  for (const auto& a : bm.nuY) s += a.w * a.x * (-std::expm1(-lambda * a.x));
  return s;
}

// Laplace exponent of the tagged-jump sum against the subordinator u nu^Y(du).
inline TestReport tagged_jump_test(const BranchingMechanism& bm, double x0, double t,
                                   const std::vector<double>& lambdas, const BranchingRunOptions& opt) {
  if (!(t > 0.0)) throw DomainError("tagged-jump test needs positive time");
  const auto S = parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, r);
    return tagged_sum(simulate_cbi(bm, x0, t, opt.dt, g));
  });
  TestReport rep;
  rep.experiment = "tagged-jumps";
  for (double l : lambdas) {
    Accumulator acc;
    for (double s : S) acc.add(std::exp(-l * s));
    const double target = tagged_exponent(bm, l);
    const std::string tag = lambda_tag(l);
    MCEstimate lap{acc.mean(), acc.stderr_of_mean(), acc.count()};
    // delta method: exponent -log(mean)/t
    const MCEstimate expo{-std::log(lap.mean) / t, lap.stderr_ / (lap.mean * t), lap.n};
    rep.add("empirical exponent " + tag, expo);
    rep.add("target exponent " + tag, target);
    rep.verdicts.push_back(within_sigma("tagged-jump exponent " + tag, expo, target, opt.sigmas,
                                        "tagged-jumps-form-subordinator-u-nuY"));
  }
  return rep;
}

}  // namespace lookdown
