#pragma once

#include "numerics.hpp"
#include "random.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace lookdown {

struct Atom {
  double x;  // location (frequency y, or jump size u)
  double w;  // weight
};

enum class NuKind { None, Beta, Atoms };

// Jump part of the reproduction intensity on (0,1].
struct NuSpec {
  NuKind kind = NuKind::None;
  double alpha = 0.0;
  std::vector<Atom> atoms;

  static NuSpec none() { return {}; }
  static NuSpec beta(double a) {
    NuSpec n;
    n.kind = NuKind::Beta;
    n.alpha = a;
    n.validate();
    return n;
  }
  static NuSpec from_atoms(std::vector<Atom> a) {
    NuSpec n;
    n.kind = NuKind::Atoms;
    n.atoms = std::move(a);
    n.validate();
    return n;
  }

  void validate() const {
    if (kind == NuKind::Beta && !(alpha > 1.0 && alpha < 2.0))
      throw ConfigError("alpha must lie in (1,2)");
    if (kind == NuKind::Atoms) {
      for (const auto& a : atoms) {
        if (!(a.x > 0.0 && a.x <= 1.0)) throw ConfigError("atom location must lie in (0,1]");
        if (!(a.w > 0.0)) throw ConfigError("atom weight must be positive");
      }
    }
  }

  bool is_null() const {
    return kind == NuKind::None || (kind == NuKind::Atoms && atoms.empty());
  }

  // Integral of y^2 h(y) nu(dy). Passing h = g/y^2 keeps the integrand
  // bounded at 0 for integrands g vanishing quadratically.
  template <class H>
  double integrate_y2(H&& h, std::vector<double> breaks = {}) const {
    switch (kind) {
      case NuKind::None:
        return 0.0;
      case NuKind::Atoms: {
        double s = 0.0;
        for (const auto& a : atoms) s += a.w * a.x * a.x * h(a.x);
        return s;
      }
      case NuKind::Beta:
        return weighted_unit_integral(h, 1.0 - alpha, alpha - 1.0, std::move(breaks));
    }
    return 0.0;
  }

  double second_moment() const {
    if (kind == NuKind::Beta) return boost::math::beta(2.0 - alpha, alpha);
    return integrate_y2([](double) { return 1.0; });
  }
};

// Kingman mass c and jump measure nu; Lambda{0} = c, x^-2 Lambda(dx) = nu(dx).
struct LambdaSpec {
  double c = 0.0;
  NuSpec nu;

  void validate() const {
    if (!(c >= 0.0)) throw ConfigError("Kingman mass c must be nonnegative");
    nu.validate();
  }
  bool degenerate() const { return c == 0.0 && nu.is_null(); }
};

inline double choose2(double n) { return 0.5 * n * (n - 1.0); }

// Probability that Bin(n, x) >= 2.
inline double p_two_or_more(long n, double x) {
  if (n < 2 || x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double nd = static_cast<double>(n);
  if (nd * x < 0.1) {
    // sum_{k>=2} (-1)^k (k-1) C(n,k) x^k; terms shrink by about n x.
    double term = choose2(nd) * x * x;  // C(n,k) x^k at k=2
    double s = term;
    for (long k = 3; k <= n && k < 40; ++k) {
      term *= -(nd - static_cast<double>(k) + 1.0) / static_cast<double>(k) * x;
      s += static_cast<double>(k - 1) * term;
    }
    return s;
  }
  const double lq = std::log1p(-x);
  return -std::expm1(nd * lq) - nd * x * std::exp((nd - 1.0) * lq);
}

inline std::vector<double> level_breaks(long i) {
  std::vector<double> b;
  for (double m : {0.25, 1.0, 4.0, 16.0}) {
    const double y = m / static_cast<double>(i);
    if (y < 0.5) b.push_back(y);
  }
  return b;
}

// r_i: rate of events touching at least two of the first i levels.
inline double pushing_rate(const LambdaSpec& spec, long i) {
  if (i < 1) throw DomainError("level must be positive");
  if (i == 1) return 0.0;
  const double n = static_cast<double>(i);
  const double kingman = spec.c * choose2(n);
  const auto h = [i, n](double y) {
    if (y < 1e-100) return choose2(n);
    return p_two_or_more(i, y) / (y * y);
  };
  return kingman + spec.nu.integrate_y2(h, level_breaks(i));
}

// r_{j+1} - r_j computed on its own.
inline double pushing_rate_increment(const LambdaSpec& spec, long j) {
  if (j < 1) throw DomainError("level must be positive");
  const double n = static_cast<double>(j);
  const auto h = [n](double y) { return n * std::pow(1.0 - y, n - 1.0); };
  return spec.c * n + spec.nu.integrate_y2(h, level_breaks(j));
}

// Closed form of the jump part of r_{j+1} - r_j for the Beta family.
inline double beta_increment_closed(double alpha, long j) {
  return static_cast<double>(j) * boost::math::beta(2.0 - alpha, static_cast<double>(j) + alpha - 1.0);
}

// Gamma(2-alpha) j^alpha / alpha
inline double beta_rate_asymptote(double alpha, long j) {
  return boost::math::tgamma(2.0 - alpha) * std::pow(static_cast<double>(j), alpha) / alpha;
}

// Draws the frequency of a jump event conditioned to touch >= 2 of N levels.
class JumpFrequencySampler {
 public:
  JumpFrequencySampler(const LambdaSpec& spec, long N, long max_iterations = 1000000)
      : nu_(spec.nu), N_(N), pairs_(choose2(static_cast<double>(N))), cap_(max_iterations) {
    if (nu_.is_null()) throw ConfigError("jump sampler needs a nonzero jump measure");
    if (N < 2) throw ConfigError("truncation level must be at least 2");
    if (nu_.kind == NuKind::Atoms) {
      double acc = 0.0;
      for (const auto& a : nu_.atoms) {
        acc += a.w * a.x * a.x;
        cumulative_.push_back(acc);
      }
    }
  }

  // Draw from the x^2-biased proposal.
  double propose(Rng& g) const {
    if (nu_.kind == NuKind::Beta) return beta_draw(g, 2.0 - nu_.alpha, nu_.alpha);
    const double u = uniform01(g) * cumulative_.back();
    std::size_t k = 0;
    while (k + 1 < cumulative_.size() && cumulative_[k] < u) ++k;
    return nu_.atoms[k].x;
  }

  double acceptance(double x) const { return p_two_or_more(N_, x) / (pairs_ * x * x); }

  double operator()(Rng& g) const {
    for (long it = 0; it < cap_; ++it) {
      const double x = propose(g);
      if (x <= 0.0) continue;
      if (N_ == 2 || uniform01(g) < acceptance(x)) return x;
    }
    throw SamplerFailure("jump frequency rejection loop exceeded its iteration cap");
  }

  long N() const { return N_; }

 private:
  NuSpec nu_;
  long N_;
  double pairs_;
  long cap_;
  std::vector<double> cumulative_;
};

inline double sample_jump_frequency(const LambdaSpec& spec, long N, Rng& g) {
  return JumpFrequencySampler(spec, N)(g);
}

// Exponent of a subordinator: drift * lambda + sum m (1 - e^{-lambda u}).
struct SubordinatorExponent {
  double drift = 0.0;
  std::vector<Atom> levy;  // (u, mass)

  double operator()(double lambda) const {
    double v = drift * lambda;
    for (const auto& a : levy) v += a.w * -std::expm1(-lambda * a.x);
    return v;
  }
  double derivative(double lambda) const {
    double v = drift;
    for (const auto& a : levy) v += a.w * a.x * std::exp(-lambda * a.x);
    return v;
  }
};

// psi(l) = sigma2 l^2/2 + beta l + sum w (e^{-l u} - 1 + l u 1{u<=1}).
struct BranchingMechanism {
  double sigma2 = 0.0;
  double beta = 0.0;
  std::vector<Atom> nuY;  // (u, w)

  void validate() const {
    if (!(sigma2 >= 0.0)) throw ConfigError("sigma2 must be nonnegative");
    for (const auto& a : nuY) {
      if (!(a.x > 0.0)) throw ConfigError("jump size must be positive");
      if (!(a.w > 0.0)) throw ConfigError("jump weight must be positive");
    }
  }

  double psi(double l) const {
    double v = 0.5 * sigma2 * l * l + beta * l;
    for (const auto& a : nuY) v += a.w * (std::expm1(-l * a.x) + (a.x <= 1.0 ? l * a.x : 0.0));
    return v;
  }
  double psi_prime(double l) const {
    double v = sigma2 * l + beta;
    for (const auto& a : nuY) v += a.w * a.x * ((a.x <= 1.0 ? 1.0 : 0.0) - std::exp(-l * a.x));
    return v;
  }
  double psi_prime_at_zero() const {
    double v = beta;
    for (const auto& a : nuY)
      if (a.x > 1.0) v -= a.w * a.x;
    return v;
  }
  // Linear decay rate of Y between jumps: dY = -b Y dt + ...
  double drift_rate() const {
    double b = beta;
    for (const auto& a : nuY)
      if (a.x <= 1.0) b += a.w * a.x;
    return b;
  }
};

inline SubordinatorExponent phi_tilde(const BranchingMechanism& bm) {
  SubordinatorExponent e;
  e.drift = bm.sigma2;
  for (const auto& a : bm.nuY) e.levy.push_back({a.x, a.x * a.w});
  return e;
}

}  // namespace lookdown
