#pragma once

#include "engine.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lookdown {

class InfeasibleConditioning : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// P(L(0) = K) = K! E[prod_{i<=K} R0{i}] for levels drawn iid given R0.
inline double prob_L0_equals_K(const InitialLaw& R0, long K) {
  return std::tgamma(static_cast<double>(K) + 1.0) * R0.expected_product(K);
}

// P(first K of N exchangeable levels carry types 1..K | counts) = K! prod n_i / (N)_K.
inline double designated_projection(const std::vector<long>& counts, long K, long N) {
  double p = 1.0;
  for (long i = 1; i <= K; ++i)
    p *= static_cast<double>(i) * static_cast<double>(counts[i]) / static_cast<double>(N - i + 1);
  return p;
}

// M_t at truncation N: the exact projection of Q_t on the counts at t.
inline std::vector<double> weight_M(const TrajectoryRecord<Alphabet>& rec, long K, const LambdaSpec& spec,
                                    const InitialLaw& R0) {
  const double p0 = prob_L0_equals_K(R0, K);
  if (!(p0 > 0.0)) throw ConfigError("initial law gives zero weight to the designated types");
  const double rK = pushing_rate(spec, K);
  std::vector<double> w;
  for (const auto& s : rec.snaps) w.push_back(designated_projection(s.counts, K, rec.N) * std::exp(rK * s.time) / p0);
  return w;
}

inline std::vector<double> weight_Q(const TrajectoryRecord<Alphabet>& rec, long K, const LambdaSpec& spec,
                                    const InitialLaw& R0) {
  const double p0 = prob_L0_equals_K(R0, K);
  if (!(p0 > 0.0)) throw ConfigError("initial law gives zero weight to the designated types");
  const double rK = pushing_rate(spec, K);
  std::vector<double> w;
  for (const auto& s : rec.snaps) w.push_back(s.L == K ? std::exp(rK * s.time) / p0 : 0.0);
  return w;
}

// A bounded functional of the type frequencies (index = symbol).
struct Functional {
  std::string id;
  std::function<double(const std::vector<double>&)> f;
};

inline std::vector<Functional> product_test_family() {
  return {{"x1", [](const std::vector<double>& x) { return x[1]; }},
          {"x1^2", [](const std::vector<double>& x) { return x[1] * x[1]; }},
          {"x1*x2", [](const std::vector<double>& x) { return x[1] * x[2]; }}};
}

inline std::vector<double> frequencies(const Snapshot<Alphabet>& s) {
  std::vector<double> x(s.counts.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = s.freq(i);
  return x;
}

struct HtransformOptions {
  std::uint64_t seed = 1;
  std::size_t replicas = 10000;
  long N = 100;
  unsigned workers = 1;
  double sigmas = 3.0;
};

namespace detail {

inline RecordOptions designated_record(long K, const InitialLaw& R0) {
  RecordOptions o;
  o.designated_K = K;
  o.alphabet = R0.alphabet();
  return o;
}

inline void check_designated(long K, const InitialLaw& R0, long N) {
  if (K < 1 || K > static_cast<long>(R0.alphabet())) throw ConfigError("K must lie in 1..alphabet size");
  if (K > N) throw ConfigError("K must not exceed N");
}

}  // namespace detail

// E[M_t] = E[Q_t] = 1 on the time grid, plus the binned projection identity.
inline TestReport martingale_check(const LambdaSpec& spec, long K, const InitialLaw& R0,
                                   const std::vector<double>& times, const HtransformOptions& opt) {
  detail::check_designated(K, R0, opt.N);
  const double horizon = *std::max_element(times.begin(), times.end());
  const auto rec_opt = detail::designated_record(K, R0);
  const auto recs = parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, r);
    return run_gfv<Alphabet>(spec, NoMutation{}, init_exchangeable(R0, opt.N, g), horizon, times, 0, g, rec_opt);
  });
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::vector<double>> M(sorted.size()), Q(sorted.size());
  for (const auto& rec : recs) {
    const auto m = weight_M(rec, K, spec, R0), q = weight_Q(rec, K, spec, R0);
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      M[k].push_back(m[k]);
      Q[k].push_back(q[k]);
    }
  }
  const std::string st = "weights-are-mean-one-martingales";
  TestReport rep = martingale_flatness(M, sorted, opt.sigmas, "M", st);
  const TestReport rq = martingale_flatness(Q, sorted, opt.sigmas, "Q", st);
  rep.estimates.insert(rep.estimates.end(), rq.estimates.begin(), rq.estimates.end());
  rep.verdicts.insert(rep.verdicts.end(), rq.verdicts.begin(), rq.verdicts.end());
  // Projection: within bins of M at the last time, mean Q matches mean M.
  const std::size_t last = sorted.size() - 1;
  std::vector<std::size_t> idx(M[last].size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return M[last][a] < M[last][b]; });
  const std::size_t bins = 5, per = idx.size() / bins;
  for (std::size_t b = 0; b < bins && per >= 2; ++b) {
    Accumulator qa, ma;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      qa.add(Q[last][idx[i]]);
      ma.add(M[last][idx[i]]);
    }
    const std::string tag = "projection bin " + std::to_string(b + 1) + "/" + std::to_string(bins);
    const MCEstimate eq = qa.estimate();
    rep.add(tag + " Q", eq);
    rep.add(tag + " M", ma.mean());
    rep.verdicts.push_back(within_sigma(tag, eq, ma.mean(), opt.sigmas, "M-is-projection-of-Q"));
  }
  rep.experiment = "martingales";
  return rep;
}

// Mean of f(R_s^h) on restricted runs against the M-weighted mean of f(R_s).
inline TestReport verify_htransform_equality(const LambdaSpec& spec, long K, const InitialLaw& R0, double s,
                                             const std::vector<Functional>& family,
                                             const HtransformOptions& opt) {
  detail::check_designated(K, R0, opt.N);
  const auto rec_opt = detail::designated_record(K, R0);
  const auto restricted = parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, 2 * r);
    return run_gfv<Alphabet>(spec, NoMutation{}, init_product_h(K, R0, opt.N, g), s, {s}, K, g, rec_opt).snaps[0];
  });
  const auto free = parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, 2 * r + 1);
    return run_gfv<Alphabet>(spec, NoMutation{}, init_exchangeable(R0, opt.N, g), s, {s}, 0, g, rec_opt);
  });
  TestReport rep;
  rep.experiment = "htransform-equality";
  for (const auto& fn : family) {
    Accumulator a, b;
    for (const auto& snap : restricted) a.add(fn.f(frequencies(snap)));
    for (const auto& rec : free) b.add(fn.f(frequencies(rec.snaps[0])) * weight_M(rec, K, spec, R0)[0]);
    const MCEstimate ea = a.estimate(), eb = b.estimate();
    rep.add("restricted " + fn.id, ea);
    rep.add("weighted " + fn.id, eb);
    rep.verdicts.push_back(within_sigma("restricted vs weighted " + fn.id, ea, eb, opt.sigmas,
                                        "restricted-lookdown-is-product-h-transform"));
  }
  return rep;
}

struct ConditionedSample {
  Snapshot<Alphabet> at_s;
  long attempts = 0;
};

// Rejection sampling on {all designated types present among the N levels at t}.
// Without mutation extinction is permanent, so runs are abandoned as soon as a
// designated type is lost.
inline ConditionedSample conditioned_sampler(const LambdaSpec& spec, long K, const InitialLaw& R0, double t,
                                             double s, long N, Rng& g, double acceptance_floor = 1e-4) {
  detail::check_designated(K, R0, N);
  if (!(s >= 0.0 && s <= t)) throw ConfigError("observation time must lie in [0, t]");
  if (!(acceptance_floor > 0.0 && acceptance_floor < 1.0)) throw ConfigError("acceptance floor must lie in (0,1)");
  const auto rec_opt = detail::designated_record(K, R0);
  const long max_attempts = static_cast<long>(std::ceil(10.0 / acceptance_floor));
  const auto all_present = [&](const std::vector<Alphabet>& types) {
    std::vector<char> seen(K + 1, 0);
    long found = 0;
    for (auto v : types)
      if (v >= 1 && v <= K && !seen[v]) {
        seen[v] = 1;
        if (++found == K) return true;
      }
    return false;
  };
  ConditionedSample out;
  GfvEngine<Alphabet> eng(spec, N);
  const double check = 0.25;
  while (out.attempts < max_attempts) {
    ++out.attempts;
    eng.reset(init_exchangeable(R0, N, g), g);
    const auto& at_s = eng.types_at(s, g);
    if (!all_present(at_s)) continue;
    out.at_s = take_snapshot(s, 1.0, at_s, rec_opt);
    bool alive = true;
    for (double u = s + check; alive && u < t; u += check) alive = all_present(eng.types_at(u, g));
    if (alive && all_present(eng.types_at(t, g))) return out;
  }
  throw InfeasibleConditioning("acceptance rate fell below " + std::to_string(acceptance_floor));
}

struct ConditionedEnsemble {
  std::vector<double> values;  // R_s{1} per accepted run
  double acceptance = 0.0;
};

inline ConditionedEnsemble conditioned_ensemble(const LambdaSpec& spec, long K, const InitialLaw& R0, double t,
                                                double s, const HtransformOptions& opt,
                                                double acceptance_floor = 1e-4) {
  const auto samples = parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, r);
    return conditioned_sampler(spec, K, R0, t, s, opt.N, g, acceptance_floor);
  });
  ConditionedEnsemble e;
  long attempts = 0;
  for (const auto& c : samples) {
    e.values.push_back(c.at_s.freq(1));
    attempts += c.attempts;
  }
  e.acceptance = attempts > 0 ? static_cast<double>(samples.size()) / static_cast<double>(attempts) : 0.0;
  return e;
}

inline std::vector<double> restricted_marginal(const LambdaSpec& spec, long K, const InitialLaw& R0, double s,
                                               const HtransformOptions& opt) {
  detail::check_designated(K, R0, opt.N);
  const auto rec_opt = detail::designated_record(K, R0);
  return parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Rng g = make_rng(opt.seed, r);
    return run_gfv<Alphabet>(spec, NoMutation{}, init_product_h(K, R0, opt.N, g), s, {s}, K, g, rec_opt)
        .snaps[0]
        .freq(1);
  });
}

// sum_{j=max(K,2)}^{J} 1/r_j
inline double inverse_rate_partial_sum(const LambdaSpec& spec, long K, long J) {
  double s = 0.0;
  for (long j = std::max(K, 2L); j <= J; ++j) s += 1.0 / pushing_rate(spec, j);
  return s;
}

struct CoexistenceRow {
  double t = 0.0;
  long N = 0;
  MCEstimate pK, pK1;  // P_K(L(t) <= N), P_{K+1}(L(t) <= N)
  MCEstimate ratio;
  double envelope_shape = 0.0;  // exp(-(r_{K+1} - r_K) t / 2)
  double exact_stay = 0.0;      // P_K(L(t) = K) = exp(-r_K t)
  long coupling_violations = 0; // runs with L_{K+1} finite but L_K not
};

namespace detail {

// Paired ratio of means with delta-method standard error.
inline MCEstimate ratio_estimate(const std::vector<double>& num, const std::vector<double>& den) {
  const std::size_t n = num.size();
  Accumulator a, b;
  for (std::size_t i = 0; i < n; ++i) {
    a.add(num[i]);
    b.add(den[i]);
  }
  if (b.mean() <= 0.0) return {NAN, NAN, n};
  const double r = a.mean() / b.mean();
  Accumulator lin;
  for (std::size_t i = 0; i < n; ++i) lin.add((num[i] - r * den[i]) / b.mean());
  return {r, lin.stderr_of_mean(), n};
}

}  // namespace detail

// Common random numbers: both configurations consume the same event stream.
inline std::vector<CoexistenceRow> coexistence_rows(const LambdaSpec& spec, long K, const std::vector<double>& times,
                                                    long N, const HtransformOptions& opt) {
  if (K < 1 || K + 1 > N) throw ConfigError("coexistence needs 1 <= K < N");
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  struct Pair {
    std::vector<char> k, k1;
  };
  const auto runs = parallel_replicas(opt.replicas, opt.workers, [&](std::size_t r) {
    Pair p;
    for (long j : {K, K + 1}) {
      Rng g = make_rng(opt.seed, r);
      GfvEngine<Alphabet> eng(spec, N);
      eng.reset(init_first_appearance(K, j, N), g);
      auto& out = j == K ? p.k : p.k1;
      for (double t : sorted) out.push_back(level_L(eng.types_at(t, g), K) != kOverCap);
    }
    return p;
  });
  const double rK = pushing_rate(spec, K), rK1 = pushing_rate(spec, K + 1);
  std::vector<CoexistenceRow> rows;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    std::vector<double> a, b;
    CoexistenceRow row;
    for (const auto& p : runs) {
      a.push_back(p.k1[i]);
      b.push_back(p.k[i]);
      if (p.k1[i] && !p.k[i]) ++row.coupling_violations;
    }
    row.t = sorted[i];
    row.N = N;
    row.pK1 = mc_estimate(a);
    row.pK = mc_estimate(b);
    row.ratio = detail::ratio_estimate(a, b);
    row.envelope_shape = std::exp(-(rK1 - rK) * row.t / 2.0);
    row.exact_stay = std::exp(-rK * row.t);
    rows.push_back(row);
  }
  return rows;
}

// Ratio estimates at N and 2N, the persistence bound, the fitted envelope
// constant and partial sums of 1/r_j.
inline TestReport coexistence_decay(const LambdaSpec& spec, long K, const std::vector<double>& times,
                                    const HtransformOptions& opt, std::vector<CoexistenceRow>* rows_out = nullptr) {
  TestReport rep;
  rep.experiment = "coexistence-decay";
  std::vector<CoexistenceRow> all;
  for (long N : {opt.N, 2 * opt.N}) {
    const auto rows = coexistence_rows(spec, K, times, N, opt);
    double C = 0.0;
    for (const auto& r : rows) {
      const std::string tag = "N=" + std::to_string(N) + " t=" + std::to_string(r.t);
      rep.add("P_K(L<=N) " + tag, r.pK);
      rep.add("P_K+1(L<=N) " + tag, r.pK1);
      if (std::isnan(r.ratio.mean)) continue;
      rep.add("ratio " + tag, r.ratio);
      rep.verdicts.push_back({"ratio in [0,1] " + tag, r.ratio.mean >= 0.0 && r.ratio.mean <= 1.0 + opt.sigmas * r.ratio.stderr_,
                              r.ratio.mean, 1.0, "persistence-orders-first-appearance"});
      C = std::max(C, r.ratio.mean / r.envelope_shape);
    }
    rep.add("fitted envelope constant N=" + std::to_string(N), C);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  // N-sensitivity: the proxy should not move by more than MC noise.
  const std::size_t m = all.size() / 2;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& a = all[i];
    const auto& b = all[m + i];
    if (std::isnan(a.ratio.mean) || std::isnan(b.ratio.mean)) continue;
    rep.add("ratio N-sensitivity t=" + std::to_string(a.t), b.ratio.mean - a.ratio.mean);
  }
  for (long J : {10L, 100L, 1000L, opt.N})
    rep.add("partial sum 1/r_j up to " + std::to_string(J), inverse_rate_partial_sum(spec, K, J));
  if (rows_out) *rows_out = std::move(all);
  return rep;
}

}  // namespace lookdown
