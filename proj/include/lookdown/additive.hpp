#pragma once

#include "branching.hpp"
#include "engine.hpp"
#include "measures.hpp"
#include "numerics.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace lookdown {

// Space-time harmonic h_t for the mutation process, so that m(t) h_t(xi_t)
// is a martingale.
struct HarmonicPair {
  enum class Kind { Constant, Eigen, TerminalValue, Exponential };
  Kind kind = Kind::Constant;
  std::vector<double> h;  // eigenvector, or terminal values g at the horizon
  double theta = 0.0;
  double horizon = INFINITY;
  Matrix Q;
  double diffusion = 0.0;
  double m_rate = 0.0;  // m(t) = exp(-m_rate t)

  static HarmonicPair constant() { return {}; }

  static HarmonicPair eigen(const FiniteChain& chain, std::vector<double> h, double theta) {
    chain.validate();
    if (h.size() != chain.Q.size()) throw ConfigError("h must have one entry per state");
    for (double v : h)
      if (!(v > 0.0)) throw ConfigError("h must be positive");
    for (std::size_t i = 0; i < h.size(); ++i) {
      double Ah = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) Ah += chain.Q[i][j] * h[j];
      if (std::abs(Ah - theta * h[i]) > 1e-10) throw ConfigError("h is not an eigenvector of the rate matrix with this theta");
    }
    HarmonicPair p;
    p.kind = Kind::Eigen;
    p.h = std::move(h);
    p.theta = theta;
    p.Q = chain.Q;
    return p;
  }

  // h_t = exp((T - t) A) g on [0, T].
  static HarmonicPair terminal_value(const FiniteChain& chain, std::vector<double> g, double T) {
    chain.validate();
    if (g.size() != chain.Q.size()) throw ConfigError("terminal values need one entry per state");
    for (double v : g)
      if (!(v > 0.0)) throw ConfigError("terminal values must be positive");
    if (!(T > 0.0 && std::isfinite(T))) throw ConfigError("terminal horizon must be positive and finite");
    HarmonicPair p;
    p.kind = Kind::TerminalValue;
    p.h = std::move(g);
    p.horizon = T;
    p.Q = chain.Q;
    return p;
  }

  static HarmonicPair exponential(const BrownianMotion& bm, double theta) {
    if (!(bm.diffusion > 0.0)) throw ConfigError("diffusion constant must be positive");
    HarmonicPair p;
    p.kind = Kind::Exponential;
    p.theta = theta;
    p.diffusion = bm.diffusion;
    return p;
  }

  bool trivial() const { return kind == Kind::Constant; }
  double m(double t) const { return std::exp(-m_rate * t); }

  void check_time(double t) const {
    if (t > horizon + 1e-12) throw ConfigError("time exceeds the terminal horizon of h");
  }

  // h_t on symbols 1..A, indexed from 0.
  std::vector<double> finite_vector(double t, std::size_t A) const {
    check_time(t);
    std::vector<double> v;
    switch (kind) {
      case Kind::Constant:
        v.assign(A, 1.0);
        break;
      case Kind::Eigen:
        v = h;
        for (auto& x : v) x *= std::exp(-theta * t);
        break;
      case Kind::TerminalValue:
        v = mat_vec(expm_generator(Q, std::max(0.0, horizon - t)), h);
        break;
      case Kind::Exponential:
        throw ConfigError("exponential h needs a scalar type space");
    }
    if (v.size() != A) throw ConfigError("h does not match the alphabet size");
    for (auto& x : v) x /= m(t);
    return v;
  }

  double scalar(double t, double x) const {
    if (kind == Kind::Constant) return 1.0 / m(t);
    if (kind != Kind::Exponential) throw ConfigError("finite-chain h needs an alphabet type space");
    return std::exp(theta * x - 0.5 * theta * theta * diffusion * t) / m(t);
  }

  // Upper bound on h_t(y) / h_t(x) over states and times.
  double ratio_bound() const {
    if (kind == Kind::Constant || kind == Kind::Exponential) return 1.0;
    const auto [lo, hi] = std::minmax_element(h.begin(), h.end());
    return *hi / *lo;
  }
};

// Gaussian iid initial types for the scalar (Brownian) type space.
struct GaussianInitial {
  double mean = 0.0;
  double sd = 1.0;
};

struct AdditiveConfig {
  LambdaSpec spec;                       // GFV mode
  std::optional<BranchingMechanism> cb;  // Dawson-Watanabe mode when set
  double x0 = 1.0;                       // initial mass in CB mode
  MutationModel mutation = NoMutation{};
  HarmonicPair h;
  InitialLaw R0 = InitialLaw::deterministic({0.5, 0.5});
  GaussianInitial gauss;
  long N = 100;
  double dt = 1e-3;  // CB path step

  bool cb_mode() const { return cb.has_value(); }
  double y0() const { return cb_mode() ? x0 : 1.0; }

  void validate() const {
    if (N < 2) throw ConfigError("N must be at least 2");
    validate_mutation(mutation);
    if (cb_mode()) {
      cb->validate();
      if (!(x0 > 0.0)) throw ConfigError("initial mass must be positive");
    } else {
      spec.validate();
    }
  }
};

namespace detail {

inline HarmonicPair with_normalizer(const AdditiveConfig& cfg) {
  HarmonicPair h = cfg.h;
  h.m_rate = cfg.cb_mode() ? cfg.cb->psi_prime_at_zero() : 0.0;
  return h;
}

}  // namespace detail

// E[Z_0(h_0)] = y0 E[R_0(h_0)]
template <class Symbol>
double expected_initial_h(const AdditiveConfig& cfg) {
  const HarmonicPair h = detail::with_normalizer(cfg);
  double e = 0.0;
  if constexpr (std::is_integral_v<Symbol>) {
    e = cfg.R0.expected_linear(h.finite_vector(0.0, cfg.R0.alphabet()));
  } else {
    if (h.kind == HarmonicPair::Kind::Exponential)
      e = std::exp(h.theta * cfg.gauss.mean + 0.5 * h.theta * h.theta * cfg.gauss.sd * cfg.gauss.sd);
    else
      e = h.scalar(0.0, 0.0);
  }
  e *= cfg.y0();
  if (!(e > 0.0)) throw ConfigError("E[Y0 R0(h0)] must be positive");
  return e;
}

// Level-1 mutation under the h-transform.
template <class Symbol>
typename Lookdown<Symbol>::Level1Mutator level1_mutator(const AdditiveConfig& cfg) {
  const HarmonicPair h = detail::with_normalizer(cfg);
  if (h.trivial() || !has_mutation(cfg.mutation)) return {};
  if constexpr (std::is_integral_v<Symbol>) {
    const auto* fc = std::get_if<FiniteChain>(&cfg.mutation);
    if (!fc) throw ConfigError("finite-chain h needs a finite-chain mutation model");
    const Matrix Q = fc->Q;
    const double bound = fc->max_exit_rate() * h.ratio_bound();
    const std::size_t A = Q.size();
    if (h.kind == HarmonicPair::Kind::Eigen) {
      // time-homogeneous: the h-transformed chain directly
      Matrix Qh(A, std::vector<double>(A, 0.0));
      for (std::size_t i = 0; i < A; ++i) {
        for (std::size_t j = 0; j < A; ++j)
          if (i != j) Qh[i][i] -= (Qh[i][j] = Q[i][j] * h.h[j] / h.h[i]);
      }
      const MutationModel m = FiniteChain{Qh};
      return [m](Symbol& s, double from, double to, Rng& g) { mutate(s, to - from, m, g); };
    }
    // Thinning against the bound on q(x,y) h_t(y) / h_t(x).
    return [Q, bound, h, A](Symbol& s, double from, double to, Rng& g) {
      if (bound <= 0.0) return;
      double t = from;
      for (;;) {
        t += exponential(g, bound);
        if (t > to) return;
        const auto ht = h.finite_vector(t, A);
        const std::size_t i = static_cast<std::size_t>(s) - 1;
        double u = uniform01(g) * bound;
        for (std::size_t j = 0; j < A; ++j) {
          if (j == i) continue;
          u -= Q[i][j] * ht[j] / ht[i];
          if (u <= 0.0) {
            s = static_cast<Symbol>(j + 1);
            break;
          }
        }
      }
    };
  } else {
    const auto* bmut = std::get_if<BrownianMotion>(&cfg.mutation);
    if (!bmut || h.kind != HarmonicPair::Kind::Exponential)
      throw ConfigError("scalar types need Brownian mutation with an exponential h");
    const double drift = h.theta * bmut->diffusion, d = bmut->diffusion;
    return [drift, d](Symbol& s, double from, double to, Rng& g) {
      const double dt = to - from;
      s += drift * dt + std::sqrt(d * dt) * normal(g);
    };
  }
}

template <class Symbol>
ParticleState<Symbol> additive_init(const AdditiveConfig& cfg, bool biased, Rng& g) {
  ParticleState<Symbol> s;
  if constexpr (std::is_integral_v<Symbol>) {
    const HarmonicPair h = detail::with_normalizer(cfg);
    if (!biased || h.trivial()) return init_exchangeable(cfg.R0, cfg.N, g);
    const auto h0 = h.finite_vector(0.0, cfg.R0.alphabet());
    const auto p = cfg.R0.draw_linear_weighted(h0, g);
    s = init_iid(p, cfg.N, g);
    std::vector<double> tilt(p.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += (tilt[i] = p[i] * h0[i]);
    for (auto& v : tilt) v /= z;
    s.types[0] = draw_symbol(tilt, g);
  } else {
    s.types.resize(cfg.N);
    for (auto& v : s.types) v = cfg.gauss.mean + cfg.gauss.sd * normal(g);
    if (biased && cfg.h.kind == HarmonicPair::Kind::Exponential)
      s.types[0] += cfg.h.theta * cfg.gauss.sd * cfg.gauss.sd;
  }
  return s;
}

// One run of the plain engine (biased = false) or of the h-transformed
// construction (biased = true).
template <class Symbol>
TrajectoryRecord<Symbol> run_additive(const AdditiveConfig& cfg, bool biased, const std::vector<double>& times,
                                      Rng& g) {
  cfg.validate();
  const double horizon = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
  cfg.h.check_time(horizon);
  RecordOptions opt;
  opt.alphabet = std::is_integral_v<Symbol> ? cfg.R0.alphabet() : 0;
  opt.keep_types = !std::is_integral_v<Symbol>;
  opt.designated_K = 1;
  auto init = additive_init<Symbol>(cfg, biased, g);
  if (cfg.cb_mode()) {
    const MassPath path = biased ? simulate_cbi(*cfg.cb, cfg.x0, horizon, cfg.dt, g)
                                 : simulate_cb(*cfg.cb, cfg.x0, horizon, cfg.dt, g);
    Lookdown<Symbol> core(cfg.N, cfg.mutation);
    if (biased) core.set_level1_mutator(level1_mutator<Symbol>(cfg));
    return run_general(path, core, std::move(init), times, g, opt);
  }
  GfvEngine<Symbol> eng(cfg.spec, cfg.N, cfg.mutation);
  if (biased) eng.core().set_level1_mutator(level1_mutator<Symbol>(cfg));
  eng.reset(std::move(init), g);
  TrajectoryRecord<Symbol> rec;
  rec.N = cfg.N;
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  for (double t : sorted) rec.snaps.push_back(take_snapshot(t, 1.0, eng.types_at(t, g), opt));
  return rec;
}

// R_t(h_t) from a snapshot.
template <class Symbol>
double empirical_h(const AdditiveConfig& cfg, const Snapshot<Symbol>& s, long N) {
  const HarmonicPair h = detail::with_normalizer(cfg);
  if constexpr (std::is_integral_v<Symbol>) {
    const auto ht = h.finite_vector(s.time, cfg.R0.alphabet());
    double v = 0.0;
    for (std::size_t a = 1; a < s.counts.size(); ++a) v += ht[a - 1] * static_cast<double>(s.counts[a]);
    return v / static_cast<double>(N);
  } else {
    double v = 0.0;
    for (auto x : s.types) v += h.scalar(s.time, x);
    return v / static_cast<double>(N);
  }
}

template <class Symbol>
double h_at(const AdditiveConfig& cfg, double t, Symbol x) {
  const HarmonicPair h = detail::with_normalizer(cfg);
  if constexpr (std::is_integral_v<Symbol>)
    return h.finite_vector(t, cfg.R0.alphabet())[static_cast<std::size_t>(x) - 1];
  else
    return h.scalar(t, x);
}

template <class Symbol>
std::vector<double> weight_S(const AdditiveConfig& cfg, const TrajectoryRecord<Symbol>& rec) {
  const double e0 = expected_initial_h<Symbol>(cfg);
  std::vector<double> w;
  for (const auto& s : rec.snaps) w.push_back(h_at(cfg, s.time, s.x1) * s.Y / e0);
  return w;
}

template <class Symbol>
std::vector<double> weight_T(const AdditiveConfig& cfg, const TrajectoryRecord<Symbol>& rec) {
  const double e0 = expected_initial_h<Symbol>(cfg);
  std::vector<double> w;
  for (const auto& s : rec.snaps) w.push_back(s.Y * empirical_h(cfg, s, rec.N) / e0);
  return w;
}

struct AdditiveOptions {
  std::uint64_t seed = 1;
  std::size_t replicas = 10000;
  unsigned workers = 1;
  double sigmas = 3.0;
};

template <class Symbol>
std::vector<TrajectoryRecord<Symbol>> additive_ensemble(const AdditiveConfig& cfg, bool biased,
                                                        const std::vector<double>& times, const AdditiveOptions& opt,
                                                        std::uint64_t stream_offset) {
  return parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, stream_offset + 2 * r + (biased ? 1 : 0));
    return run_additive<Symbol>(cfg, biased, times, g);
  });
}

// E[S_t] = E[T_t] = 1 and, binned by T at the last time, mean S tracks T.
template <class Symbol>
TestReport additive_martingale_check(const AdditiveConfig& cfg, const std::vector<double>& times,
                                     const AdditiveOptions& opt) {
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const auto recs = additive_ensemble<Symbol>(cfg, false, sorted, opt, 0);
  std::vector<std::vector<double>> S(sorted.size()), T(sorted.size());
  for (const auto& rec : recs) {
    const auto s = weight_S(cfg, rec), t = weight_T(cfg, rec);
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      S[k].push_back(s[k]);
      T[k].push_back(t[k]);
    }
  }
  const std::string st = "additive-weights-are-mean-one-martingales";
  TestReport rep = martingale_flatness(S, sorted, opt.sigmas, "S", st);
  const TestReport rt = martingale_flatness(T, sorted, opt.sigmas, "T", st);
  rep.estimates.insert(rep.estimates.end(), rt.estimates.begin(), rt.estimates.end());
  rep.verdicts.insert(rep.verdicts.end(), rt.verdicts.begin(), rt.verdicts.end());
  const std::size_t last = sorted.size() - 1;
  std::vector<std::size_t> idx(T[last].size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return T[last][a] < T[last][b]; });
  const std::size_t bins = 5, per = idx.size() / bins;
  for (std::size_t b = 0; b < bins && per >= 2; ++b) {
    Accumulator sa, ta;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      sa.add(S[last][idx[i]]);
      ta.add(T[last][idx[i]]);
    }
    const std::string tag = "projection bin " + std::to_string(b + 1) + "/" + std::to_string(bins);
    rep.add(tag + " S", sa.estimate());
    rep.add(tag + " T", ta.mean());
    rep.verdicts.push_back(within_sigma(tag, sa.estimate(), ta.mean(), opt.sigmas, "T-is-projection-of-S"));
  }
  rep.experiment = "additive-martingales";
  return rep;
}

// A functional of the finite measure Z_t = Y_t R_t.
template <class Symbol>
struct MeasureFunctional {
  std::string id;
  std::function<double(const Snapshot<Symbol>&, long N)> F;
};

inline std::vector<MeasureFunctional<Alphabet>> additive_test_family(std::size_t alphabet) {
  std::vector<MeasureFunctional<Alphabet>> fs;
  fs.push_back({"Z(1)", [](const Snapshot<Alphabet>& s, long) { return s.Y; }});
  fs.push_back({"exp(-Z(1))", [](const Snapshot<Alphabet>& s, long) { return std::exp(-s.Y); }});
  for (std::size_t a = 1; a <= alphabet; ++a)
    fs.push_back({"Z{" + std::to_string(a) + "}", [a](const Snapshot<Alphabet>& s, long) { return s.Y * s.freq(a); }});
  return fs;
}

template <class Symbol>
TestReport verify_additive_equality(const AdditiveConfig& cfg, const std::vector<MeasureFunctional<Symbol>>& family,
                                    double t, const AdditiveOptions& opt) {
  const auto built = additive_ensemble<Symbol>(cfg, true, {t}, opt, 0);
  const auto plain = additive_ensemble<Symbol>(cfg, false, {t}, opt, 0);
  TestReport rep;
  rep.experiment = "additive-equality";
  for (const auto& F : family) {
    Accumulator a, b;
    for (const auto& rec : built) a.add(F.F(rec.snaps[0], rec.N));
    for (const auto& rec : plain) b.add(F.F(rec.snaps[0], rec.N) * weight_T(cfg, rec)[0]);
    const MCEstimate ea = a.estimate(), eb = b.estimate();
    rep.add("built " + F.id, ea);
    rep.add("T-weighted " + F.id, eb);
    rep.verdicts.push_back(within_sigma("built vs T-weighted " + F.id, ea, eb, opt.sigmas,
                                        "additive-construction-is-h-transform"));
  }
  return rep;
}

// Level-1 type law against h_t(a) R_t{a} / R_t(h_t), and level 2 against the
// remaining levels, both as paired differences over built replicas.
inline TestReport first_level_bias_check(const AdditiveConfig& cfg, double t, const AdditiveOptions& opt) {
  const auto built = additive_ensemble<Alphabet>(cfg, true, {t}, opt, 0);
  const std::size_t A = cfg.R0.alphabet();
  TestReport rep;
  rep.experiment = "first-level-bias";
  for (std::size_t a = 1; a <= A; ++a) {
    Accumulator ind1, pred1, diff1, ind2, diff2, freq;
    for (const auto& rec : built) {
      const auto& s = rec.snaps[0];
      const double N = static_cast<double>(rec.N);
      const double pred = h_at<Alphabet>(cfg, s.time, static_cast<Alphabet>(a)) * s.freq(a) / empirical_h(cfg, s, rec.N);
      const double x1 = s.x1 == a, x2 = s.x2 == a;
      ind1.add(x1);
      pred1.add(pred);
      diff1.add(x1 - pred);
      ind2.add(x2);
      diff2.add(x2 - (static_cast<double>(s.counts[a]) - x1) / (N - 1.0));
      freq.add(s.freq(a));
    }
    const std::string tag = "type " + std::to_string(a);
    rep.add("P(level 1 = a) " + tag, ind1.estimate());
    rep.add("E[h(a) R{a} / R(h)] " + tag, pred1.estimate());
    rep.add("E[R{a}] " + tag, freq.estimate());
    rep.add("P(level 2 = a) " + tag, ind2.estimate());
    rep.verdicts.push_back(within_sigma("level 1 follows h-biased empirical law " + tag, diff1.estimate(), 0.0,
                                        opt.sigmas, "first-level-is-h-biased-sample"));
    rep.verdicts.push_back(within_sigma("level 2 follows remaining empirical law " + tag, diff2.estimate(), 0.0,
                                        opt.sigmas, "higher-levels-are-exchangeable"));
  }
  return rep;
}

}  // namespace lookdown
