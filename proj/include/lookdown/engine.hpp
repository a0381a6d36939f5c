#pragma once

#include "events.hpp"
#include "numerics.hpp"
#include "random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <type_traits>
#include <variant>
#include <vector>

namespace lookdown {

// Sentinel for a level statistic that is not attained among levels 1..N.
inline constexpr long kOverCap = -1;

struct NoMutation {};

// Rate matrix on symbols 1..A (row/column i stands for symbol i+1).
struct FiniteChain {
  Matrix Q;

  void validate() const {
    const std::size_t n = Q.size();
    if (n < 2) throw ConfigError("rate matrix needs at least two states");
    for (std::size_t i = 0; i < n; ++i) {
      if (Q[i].size() != n) throw ConfigError("rate matrix must be square");
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && Q[i][j] < 0.0) throw ConfigError("off-diagonal rates must be nonnegative");
        row += Q[i][j];
      }
      if (std::abs(row) > 1e-12) throw ConfigError("rate matrix rows must sum to zero");
    }
  }
  double max_exit_rate() const {
    double q = 0.0;
    for (std::size_t i = 0; i < Q.size(); ++i) q = std::max(q, -Q[i][i]);
    return q;
  }
};

struct BrownianMotion {
  double diffusion = 1.0;  // variance per unit time
};

using MutationModel = std::variant<NoMutation, FiniteChain, BrownianMotion>;

inline bool has_mutation(const MutationModel& m) { return !std::holds_alternative<NoMutation>(m); }

inline void validate_mutation(const MutationModel& m) {
  if (auto* fc = std::get_if<FiniteChain>(&m)) fc->validate();
  if (auto* bm = std::get_if<BrownianMotion>(&m); bm && !(bm->diffusion > 0.0))
    throw ConfigError("diffusion constant must be positive");
}

// Jump to a new state of a chain row, proportionally to the off-diagonal rates.
inline std::size_t chain_step(const Matrix& Q, std::size_t i, double exit_rate, Rng& g) {
  double u = uniform01(g) * exit_rate;
  std::size_t last = i;
  for (std::size_t j = 0; j < Q.size(); ++j) {
    if (j == i || Q[i][j] <= 0.0) continue;
    last = j;
    u -= Q[i][j];
    if (u <= 0.0) return j;
  }
  return last;
}

template <class Symbol>
void mutate(Symbol& s, double dt, const MutationModel& model, Rng& g) {
  if (dt <= 0.0) return;
  if (const auto* fc = std::get_if<FiniteChain>(&model)) {
    if constexpr (std::is_integral_v<Symbol>) {
      std::size_t i = static_cast<std::size_t>(s) - 1;
      double t = 0.0;
      for (;;) {
        const double rate = -fc->Q[i][i];
        if (rate <= 0.0) break;
        t += exponential(g, rate);
        if (t > dt) break;
        i = chain_step(fc->Q, i, rate, g);
      }
      s = static_cast<Symbol>(i + 1);
    } else {
      throw ConfigError("a finite chain needs an alphabet type space");
    }
  } else if (const auto* bm = std::get_if<BrownianMotion>(&model)) {
    if constexpr (std::is_floating_point_v<Symbol>) {
      s += std::sqrt(bm->diffusion * dt) * normal(g);
    } else {
      throw ConfigError("Brownian mutation needs a scalar type space");
    }
  }
}

template <class Symbol>
struct ParticleState {
  double time = 0.0;
  std::vector<Symbol> types;
};

using Alphabet = std::uint16_t;

template <class Symbol>
void evolve_mutation(ParticleState<Symbol>& state, double dt, const MutationModel& model, Rng& g) {
  if (dt < 0.0) throw DomainError("dt must be nonnegative");
  for (auto& s : state.types) mutate(s, dt, model, g);
  state.time += dt;
}

// Children get `child`; every other entry moves via relabel_level; entries
// pushed above the window are dropped.
template <class T>
void shift_apply(std::vector<T>& v, const std::vector<long>& block, const T& child) {
  const long N = static_cast<long>(v.size());
  if (block.size() == 2) {
    const long b = block[1];
    std::copy_backward(v.begin() + (b - 1), v.end() - 1, v.end());
    v[b - 1] = child;
    return;
  }
  long idx = static_cast<long>(block.size()) - 1;
  for (long k = N; k >= 1; --k) {
    while (idx >= 1 && block[idx] > k) --idx;
    if (idx == 0) break;
    if (block[idx] == k)
      v[k - 1] = child;
    else
      v[k - 1] = v[k - 1 - idx];
  }
}

template <class Symbol>
void apply_event(ParticleState<Symbol>& state, const ReproductionEvent& ev) {
  if (ev.block.empty()) return;
  if (ev.block.back() > static_cast<long>(state.types.size()))
    throw DomainError("event block exceeds the truncation window");
  const Symbol parent = state.types[ev.block.front() - 1];
  shift_apply(state.types, ev.block, parent);
}

// Law of the initial de Finetti measure on symbols 1..A.
struct InitialLaw {
  enum class Kind { Deterministic, Dirichlet };
  Kind kind = Kind::Deterministic;
  std::vector<double> p;  // probabilities, or Dirichlet parameters

  static InitialLaw deterministic(std::vector<double> p) {
    InitialLaw l{Kind::Deterministic, std::move(p)};
    l.validate();
    return l;
  }
  static InitialLaw dirichlet(std::vector<double> a) {
    InitialLaw l{Kind::Dirichlet, std::move(a)};
    l.validate();
    return l;
  }

  std::size_t alphabet() const { return p.size(); }

  void validate() const {
    if (p.size() < 2) throw ConfigError("alphabet must have at least two symbols");
    double s = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw ConfigError("initial law entries must be nonnegative");
      if (kind == Kind::Dirichlet && !(v > 0.0)) throw ConfigError("Dirichlet parameters must be positive");
      s += v;
    }
    if (kind == Kind::Deterministic && std::abs(s - 1.0) > 1e-12)
      throw ConfigError("initial probability vector must sum to 1");
  }

  std::vector<double> draw(Rng& g) const {
    if (kind == Kind::Deterministic) return p;
    std::vector<double> x(p.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (x[i] = gamma_draw(g, p[i]));
    for (auto& v : x) v /= s;
    return x;
  }

  // E[prod_{i<=K} R0{i}]
  double expected_product(long K) const {
    if (K > static_cast<long>(p.size())) return 0.0;
    double r = 1.0;
    if (kind == Kind::Deterministic) {
      for (long i = 0; i < K; ++i) r *= p[i];
      return r;
    }
    const double a0 = std::accumulate(p.begin(), p.end(), 0.0);
    for (long i = 0; i < K; ++i) r *= p[i] / (a0 + static_cast<double>(i));
    return r;
  }

  // The law reweighted by prod_{i<=K} R0{i}.
  InitialLaw product_weighted(long K) const {
    if (!(expected_product(K) > 0.0))
      throw ConfigError("initial law gives zero weight to the designated types");
    if (kind == Kind::Deterministic) return *this;
    InitialLaw l = *this;
    for (long i = 0; i < K; ++i) l.p[i] += 1.0;
    return l;
  }

  // E[R0(h)]
  double expected_linear(const std::vector<double>& h) const {
    const double a0 = std::accumulate(p.begin(), p.end(), 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += h[i] * p[i] / a0;
    return s;
  }

  // A draw from the law reweighted by R0(h).
  std::vector<double> draw_linear_weighted(const std::vector<double>& h, Rng& g) const {
    if (kind == Kind::Deterministic) return p;
    // Mixture over i of Dirichlet(a + e_i) with weights h_i a_i.
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += h[i] * p[i];
    double u = uniform01(g) * total;
    std::size_t pick = p.size() - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      u -= h[i] * p[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    InitialLaw l = *this;
    l.p[pick] += 1.0;
    return l.draw(g);
  }
};

inline Alphabet draw_symbol(const std::vector<double>& prob, Rng& g) {
  double u = uniform01(g);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    u -= prob[i];
    if (u <= 0.0) return static_cast<Alphabet>(i + 1);
  }
  // rounding: last symbol with positive mass
  for (std::size_t i = prob.size(); i-- > 0;)
    if (prob[i] > 0.0) return static_cast<Alphabet>(i + 1);
  return 1;
}

inline ParticleState<Alphabet> init_iid(const std::vector<double>& prob, long N, Rng& g) {
  ParticleState<Alphabet> s;
  s.types.resize(N);
  for (auto& v : s.types) v = draw_symbol(prob, g);
  return s;
}

inline ParticleState<Alphabet> init_exchangeable(const InitialLaw& R0, long N, Rng& g) {
  return init_iid(R0.draw(g), N, g);
}

inline ParticleState<Alphabet> init_product_h(long K, const InitialLaw& R0, long N, Rng& g) {
  if (K < 1 || K > static_cast<long>(R0.alphabet())) throw ConfigError("K must lie in 1..alphabet size");
  if (K > N) throw ConfigError("K must not exceed N");
  const InitialLaw weighted = R0.product_weighted(K);
  ParticleState<Alphabet> s = init_iid(weighted.draw(g), N, g);
  for (long i = 0; i < K; ++i) s.types[i] = static_cast<Alphabet>(i + 1);
  for (long i = K - 1; i > 0; --i) std::swap(s.types[i], s.types[uniform_int(g, 0, i)]);
  return s;
}

// Type K at level j, type i at level i < K, type 1 elsewhere: L(0) = j.
inline ParticleState<Alphabet> init_first_appearance(long K, long j, long N) {
  if (j < K || j > N) throw ConfigError("first-appearance level must lie in K..N");
  ParticleState<Alphabet> s;
  s.types.assign(N, 1);
  for (long i = 1; i < K; ++i) s.types[i - 1] = static_cast<Alphabet>(i);
  s.types[j - 1] = static_cast<Alphabet>(K);
  return s;
}

// L: first level by which all of the designated types 1..K have appeared.
inline long level_L(const std::vector<Alphabet>& types, long K) {
  if (K <= 0) return kOverCap;
  std::vector<char> seen(K + 1, 0);
  long found = 0;
  for (std::size_t n = 0; n < types.size(); ++n) {
    const long s = types[n];
    if (s >= 1 && s <= K && !seen[s]) {
      seen[s] = 1;
      if (++found == K) return static_cast<long>(n) + 1;
    }
  }
  return kOverCap;
}

// L1: first level holding type 1.
inline long level_L1(const std::vector<Alphabet>& types) {
  for (std::size_t n = 0; n < types.size(); ++n)
    if (types[n] == 1) return static_cast<long>(n) + 1;
  return kOverCap;
}

template <class Symbol>
struct Snapshot {
  double time = 0.0;
  double Y = 1.0;
  std::vector<long> counts;  // index = symbol, alphabet engines only
  long L = kOverCap;
  long L1 = kOverCap;
  Symbol x1{};
  Symbol x2{};
  std::vector<Symbol> types;  // kept on request

  double freq(std::size_t sym) const {
    long n = 0;
    for (long c : counts) n += c;
    return static_cast<double>(counts[sym]) / static_cast<double>(n);
  }
};

template <class Symbol>
struct TrajectoryRecord {
  long N = 0;
  std::vector<Snapshot<Symbol>> snaps;
};

struct RecordOptions {
  long designated_K = 0;
  std::size_t alphabet = 2;
  bool keep_types = false;
};

template <class Symbol>
Snapshot<Symbol> take_snapshot(double t, double Y, const std::vector<Symbol>& types,
                               const RecordOptions& opt) {
  Snapshot<Symbol> s;
  s.time = t;
  s.Y = Y;
  s.x1 = types[0];
  if (types.size() > 1) s.x2 = types[1];
  if constexpr (std::is_integral_v<Symbol>) {
    s.counts.assign(opt.alphabet + 1, 0);
    for (auto v : types) ++s.counts.at(v);
    s.L = level_L(types, opt.designated_K);
    s.L1 = level_L1(types);
  }
  if (opt.keep_types) s.types = types;
  return s;
}

// Particle types with lazy per-level mutation clocks. A level's type is
// only brought up to date when it is read.
template <class Symbol>
class Lookdown {
 public:
  using Level1Mutator = std::function<void(Symbol&, double from, double to, Rng&)>;

  Lookdown(long N, MutationModel mut = NoMutation{}) : N_(N), mut_(std::move(mut)) {
    validate_mutation(mut_);
  }

  void set_level1_mutator(Level1Mutator m) { level1_ = std::move(m); }

  void reset(ParticleState<Symbol> s) {
    if (static_cast<long>(s.types.size()) != N_) throw ConfigError("state length must equal N");
    types_ = std::move(s.types);
    t_ = s.time;
    stamp_.assign(N_, t_);
  }

  long N() const { return N_; }
  double time() const { return t_; }

  void sync_level(long k, double t, Rng& g) {
    double& st = stamp_[k - 1];
    if (t <= st) return;
    if (k == 1 && level1_)
      level1_(types_[0], st, t, g);
    else
      mutate(types_[k - 1], t - st, mut_, g);
    st = t;
  }

  const std::vector<Symbol>& sync_all(double t, Rng& g) {
    if (has_mutation(mut_) || level1_)
      for (long k = 1; k <= N_; ++k) sync_level(k, t, g);
    t_ = std::max(t_, t);
    return types_;
  }

  void apply(const std::vector<long>& block, double t, Rng& g) {
    if (block.size() < 2) return;
    t_ = t;
    const bool mutating = has_mutation(mut_) || level1_;
    if (mutating) sync_level(block.front(), t, g);
    const Symbol parent = types_[block.front() - 1];
    shift_apply(types_, block, parent);
    if (mutating) shift_apply(stamp_, block, t);
  }

  const std::vector<Symbol>& raw_types() const { return types_; }

 private:
  long N_;
  MutationModel mut_;
  Level1Mutator level1_;
  std::vector<Symbol> types_;
  std::vector<double> stamp_;
  double t_ = 0.0;
};

// GFV dynamics at truncation N, optionally dropping the events that touch
// two or more of the first K levels.
template <class Symbol>
class GfvEngine {
 public:
  GfvEngine(const LambdaSpec& spec, long N, MutationModel mut = NoMutation{}, long restricted_K = 0)
      : src_(spec, N), core_(N, std::move(mut)), K_(restricted_K) {
    if (K_ < 0 || K_ > N) throw ConfigError("restriction level must lie in 0..N");
  }

  Lookdown<Symbol>& core() { return core_; }
  const EventSource& source() const { return src_; }

  void reset(ParticleState<Symbol> s, Rng& g) {
    core_.reset(std::move(s));
    next_ = src_.next_time(core_.time(), g);
  }

  // Runs events up to time t; returns the number of applied events.
  long advance_to(double t, Rng& g) {
    long applied = 0;
    while (next_ <= t) {
      ev_.time = next_;
      src_.sample_mark(g, ev_);
      if (!(K_ > 1 && touches_two_of(ev_, K_))) {
        core_.apply(ev_.block, next_, g);
        ++applied;
      }
      next_ = src_.next_time(next_, g);
    }
    return applied;
  }

  const std::vector<Symbol>& types_at(double t, Rng& g) {
    advance_to(t, g);
    return core_.sync_all(t, g);
  }

 private:
  EventSource src_;
  Lookdown<Symbol> core_;
  long K_;
  ReproductionEvent ev_;
  double next_ = INFINITY;
};

template <class Symbol>
TrajectoryRecord<Symbol> run_gfv(const LambdaSpec& spec, const MutationModel& mutation,
                                 ParticleState<Symbol> init, double horizon,
                                 const std::vector<double>& sample_times, long restricted_K,
                                 Rng& g, const RecordOptions& opt = {}) {
  for (double s : sample_times)
    if (s < 0.0 || s > horizon) throw ConfigError("sample times must lie in [0, horizon]");
  const long N = static_cast<long>(init.types.size());
  GfvEngine<Symbol> eng(spec, N, mutation, restricted_K);
  eng.reset(std::move(init), g);
  TrajectoryRecord<Symbol> rec;
  rec.N = N;
  std::vector<double> times = sample_times;
  std::sort(times.begin(), times.end());
  for (double s : times) rec.snaps.push_back(take_snapshot(s, 1.0, eng.types_at(s, g), opt));
  return rec;
}

// Mass path (Y, U) on a grid. Pair events per pair arrive at rate
// uk_rate / Y^2 + sigma2 / Y (the latter for U^k = [Y] with quadratic
// variation sigma2 * Y dt); U-jumps carry their block frequency.
struct MassPath {
  struct Jump {
    double time;
    double frequency;
    double y_minus;
    double size;
    bool tagged = false;
  };
  std::vector<double> t;
  std::vector<double> Y;
  std::vector<Jump> jumps;  // sorted by time
  double sigma2 = 0.0;
  double uk_rate = 0.0;
  bool absorbed = false;
  double absorption_time = INFINITY;
  // Tagged jumps are the ones level 1 takes part in (size-biased paths).
  bool tags_level1 = false;
};

// General-mode lookdown driven by a mass path. Types freeze at absorption.
template <class Symbol>
TrajectoryRecord<Symbol> run_general(const MassPath& path, Lookdown<Symbol>& core,
                                     ParticleState<Symbol> init,
                                     const std::vector<double>& sample_times, Rng& g,
                                     const RecordOptions& opt = {}) {
  for (const auto& j : path.jumps)
    if (!(j.frequency >= 0.0 && j.frequency <= 1.0))
      throw DomainError("resampling jump exceeds the squared mass");
  const long N = core.N();
  const double pairs = choose2(static_cast<double>(N));
  core.reset(std::move(init));
  TrajectoryRecord<Symbol> rec;
  rec.N = N;
  std::vector<double> times = sample_times;
  std::sort(times.begin(), times.end());
  std::size_t next_sample = 0, next_jump = 0;
  std::vector<long> block;
  const auto record_until = [&](double upto, std::size_t step) {
    while (next_sample < times.size() && times[next_sample] <= upto + 1e-12) {
      const double ts = times[next_sample];
      const double frozen = std::min(ts, path.absorption_time);
      rec.snaps.push_back(take_snapshot(ts, path.Y[step], core.sync_all(frozen, g), opt));
      ++next_sample;
    }
  };
  record_until(path.t.front(), 0);
  for (std::size_t i = 0; i + 1 < path.t.size(); ++i) {
    const double a = path.t[i], b = path.t[i + 1];
    if (path.Y[i] <= 0.0 || a >= path.absorption_time) {
      record_until(b, i + 1);
      continue;
    }
    double y = path.Y[i];
    double s = a;
    for (;;) {
      const double seg_end =
          (next_jump < path.jumps.size() && path.jumps[next_jump].time < b) ? path.jumps[next_jump].time : b;
      const double kappa = path.uk_rate / (y * y) + path.sigma2 / y;
      const double rate = pairs * kappa;
      if (rate > 0.0) {
        for (double e = s + exponential(g, rate); e < seg_end; e += exponential(g, rate)) {
          long p = uniform_int(g, 1, N);
          long q = uniform_int(g, 1, N - 1);
          if (q >= p) ++q;
          block.assign({std::min(p, q), std::max(p, q)});
          core.apply(block, e, g);
        }
      }
      if (seg_end >= b) break;
      const auto& jmp = path.jumps[next_jump++];
      if (path.tags_level1) {
        block.clear();
        if (jmp.tagged) block.push_back(1);
        sample_bernoulli_levels(jmp.frequency, 2, N, g, block);
        if (block.size() < 2) block.clear();
      } else {
        sample_free_block(jmp.frequency, N, g, block);
      }
      core.apply(block, jmp.time, g);
      y = jmp.y_minus + jmp.size;
      s = seg_end;
    }
    record_until(b, i + 1);
  }
  record_until(INFINITY, path.t.size() - 1);
  return rec;
}

}  // namespace lookdown
